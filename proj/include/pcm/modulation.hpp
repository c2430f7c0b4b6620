// PPM label mapping, prefix-conditioned soft demapping, and the achievable
// rate estimators built on them. The label is natural binary with b_1 as the
// least significant bit of the pulse position, d = 1 + sum_j b_j 2^{j-1}.
//
// All demapping works on the per-slot statistic delta(y) = slot_llr_increment:
// conditioning a level on its prefix selects a subset of candidate positions,
// and the level LLR is a difference of logsumexps of delta over the two
// half-sets. The common all-unpulsed factor of the symbol cancels.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pcm/channel.hpp"
#include "pcm/rng.hpp"
#include "pcm/util.hpp"

namespace pcm {

using Label = std::vector<std::uint8_t>;

inline unsigned map_label(const Label& label) {
    if (label.empty() || label.size() > 30)
        throw std::invalid_argument("map_label: label length out of range");
    unsigned d = 1;
    for (std::size_t j = 0; j < label.size(); ++j) {
        if (label[j] > 1)
            throw std::invalid_argument("map_label: bits must be 0 or 1");
        d += static_cast<unsigned>(label[j]) << j;
    }
    return d;
}

namespace detail {

// Running logsumexp accumulator.
struct LseAcc {
    double hi = -std::numeric_limits<double>::infinity();
    double acc = 0.0;

    void add(double x) {
        if (x <= hi) {
            acc += std::exp(x - hi);
        } else {
            acc = acc * std::exp(hi - x) + 1.0;
            hi = x;
        }
    }
    double value() const {
        return acc > 0.0 ? hi + std::log(acc) : -std::numeric_limits<double>::infinity();
    }
};

inline void check_demap_args(const PhotonVector& y, unsigned j, std::size_t prefix_len,
                             const ChannelParams& params) {
    if (y.size() != params.M)
        throw std::invalid_argument("demap_level: count vector length != M");
    if (j < 1 || j > params.levels())
        throw std::invalid_argument("demap_level: level index out of range");
    if (prefix_len != j - 1)
        throw std::invalid_argument("demap_level: prefix length must be j-1");
    if (params.n_s == 0.0 && params.n_b == 0.0)
        throw std::invalid_argument("demap_level: degenerate channel (n_s = n_b = 0)");
}

// Dark-count-free channel: any photon pins the pulse position exactly, no
// photons at all is an erasure. Infinities are allowed only here.
inline double demap_level_nb0(const PhotonVector& y, unsigned j, unsigned prefix_val,
                              const ChannelParams& params) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    unsigned hits = 0, slot = 0;
    for (unsigned s = 0; s < params.M; ++s) {
        if (y[s] > 0) {
            ++hits;
            slot = s;
        }
    }
    if (hits != 1)
        return 0.0;
    unsigned low = slot & ((1u << (j - 1)) - 1u);
    if (low != prefix_val)
        return 0.0;  // prefix hypothesis inconsistent with the observed pulse
    return (slot >> (j - 1)) & 1u ? -inf : inf;
}

}  // namespace detail

// ln P(Y | B_j = 0, prefix) - ln P(Y | B_j = 1, prefix) with the prefix bits
// b_1..b_{j-1} already decided.
inline double demap_level(const PhotonVector& y, unsigned j, const Label& prefix,
                          const ChannelParams& params) {
    detail::check_demap_args(y, j, prefix.size(), params);
    unsigned prefix_val = 0;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (prefix[i] > 1)
            throw std::invalid_argument("demap_level: prefix bits must be 0 or 1");
        prefix_val |= static_cast<unsigned>(prefix[i]) << i;
    }
    if (params.n_b == 0.0)
        return detail::demap_level_nb0(y, j, prefix_val, params);

    // candidate positions share the decided low bits; bit j-1 selects the
    // hypothesis and the remaining high bits are free
    detail::LseAcc side[2];
    unsigned suffixes = params.M >> j;
    for (unsigned b = 0; b < 2; ++b) {
        unsigned base = prefix_val | (b << (j - 1));
        for (unsigned t = 0; t < suffixes; ++t) {
            unsigned slot = base | (t << j);
            side[b].add(slot_llr_increment(y[slot], params));
        }
    }
    return side[0].value() - side[1].value();
}

// Every prefix-conditioned level LLR of one symbol, from a single sweep.
// Node S_j[mask] = logsumexp{delta(y_d) : d mod 2^j == mask}; combining
// children pairwise builds all levels in O(M) and each query is a lookup.
// Requires n_b > 0.
class DemapTable {
public:
    DemapTable() = default;

    DemapTable(const PhotonVector& y, const ChannelParams& params) { build(y, params); }

    void build(const PhotonVector& y, const ChannelParams& params) {
        if (y.size() != params.M)
            throw std::invalid_argument("DemapTable: count vector length != M");
        if (!(params.n_b > 0.0))
            throw std::domain_error("DemapTable: needs n_b > 0");
        m_ = params.levels();
        node_.resize(2u * params.M - 2u);
        double beta = std::log1p(params.n_s / params.n_b);
        std::size_t off = offset(m_);
        for (unsigned s = 0; s < params.M; ++s)
            node_[off + s] = beta * y[s] - params.n_s;
        for (unsigned j = m_; j-- > 1;) {
            std::size_t lo = offset(j), hi = offset(j + 1);
            unsigned width = 1u << j;
            for (unsigned mask = 0; mask < width; ++mask)
                node_[lo + mask] = log_sum_exp(node_[hi + mask], node_[hi + mask + width]);
        }
    }

    // prefix_val packs b_1..b_{j-1} LSB-first
    double llr(unsigned j, unsigned prefix_val) const {
        std::size_t off = offset(j);
        return node_[off + prefix_val] - node_[off + prefix_val + (1u << (j - 1))];
    }

    unsigned levels() const { return m_; }

private:
    static std::size_t offset(unsigned j) { return (std::size_t{1} << j) - 2u; }

    unsigned m_ = 0;
    std::vector<double> node_;
};

struct McEstimate {
    double value = 0.0;
    double std_err = 0.0;
    std::size_t samples = 0;
};

struct MiProfile {
    std::vector<double> per_level_mi;     // I(B_j; Y | B^{j-1}), clamped to [0,1]
    std::vector<double> standard_errors;  // per-level standard errors
    double sum_mi = 0.0;                  // unclamped sum of the levels
    double sum_stderr = 0.0;              // stderr of the sum (levels correlate per symbol)
    std::size_t samples_used = 0;
};

namespace detail {

inline void check_estimator_args(const ChannelParams& params, std::size_t samples) {
    if (!(params.n_b > 0.0))
        throw std::invalid_argument("estimator: n_b = 0 has a closed form, use ppm_capacity_zero_noise");
    if (samples < 10000)
        throw std::invalid_argument("estimator: need at least 1e4 samples");
}

inline double bits_of_nats(double x) { return x / std::numbers::ln2; }

}  // namespace detail

// Monte Carlo PPM capacity in bits per slot. By symmetry the pulse is fixed
// in slot 1 and the per-sample value is
//   log2(M)/M - (1/M) log2 sum_p (1 + n_s/n_b)^{Y_p - Y_1},
// with the sum taken in the log domain.
inline McEstimate ppm_capacity(const ChannelParams& params, std::size_t samples,
                               RandomStream& rng) {
    detail::check_estimator_args(params, samples);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        PhotonVector y = sample_symbol(1, params, rng);
        detail::LseAcc all;
        for (unsigned s = 0; s < params.M; ++s)
            all.add(slot_llr_increment(y[s], params));
        double v = detail::bits_of_nats(all.value() - slot_llr_increment(y[0], params));
        double c = (std::log2(static_cast<double>(params.M)) - v) / params.M;
        sum += c;
        sum_sq += c * c;
    }
    double n = static_cast<double>(samples);
    double mean = sum / n;
    double var = std::max(0.0, sum_sq / n - mean * mean);
    return {mean, std::sqrt(var / n), samples};
}

// Exact capacity of the dark-count-free channel, bits per slot.
inline double ppm_capacity_zero_noise(const ChannelParams& params) {
    if (params.n_b != 0.0)
        throw std::invalid_argument("ppm_capacity_zero_noise: defined for n_b = 0 only");
    double m = std::log2(static_cast<double>(params.M));
    return m / params.M * (-std::expm1(-params.n_s));
}

// Per-level conditional mutual informations I(B_j; Y | B^{j-1}) via the LLR
// identity I = 1 - E[log2(1 + e^{-(1-2b)L})] with genie-known prefixes.
inline MiProfile level_mi_profile(const ChannelParams& params, std::size_t samples,
                                  RandomStream& rng) {
    detail::check_estimator_args(params, samples);
    unsigned m = params.levels();
    std::vector<double> sum(m, 0.0), sum_sq(m, 0.0);
    double tot = 0.0, tot_sq = 0.0;
    DemapTable table;
    for (std::size_t i = 0; i < samples; ++i) {
        Label label = rng.bits(m);
        PhotonVector y = sample_symbol(map_label(label), params, rng);
        table.build(y, params);
        unsigned prefix_val = 0;
        double t = 0.0;
        for (unsigned j = 1; j <= m; ++j) {
            double sgn = label[j - 1] ? -1.0 : 1.0;
            double h = detail::bits_of_nats(softplus(-sgn * table.llr(j, prefix_val)));
            sum[j - 1] += h;
            sum_sq[j - 1] += h * h;
            t += h;
            prefix_val |= static_cast<unsigned>(label[j - 1]) << (j - 1);
        }
        tot += t;
        tot_sq += t * t;
    }
    MiProfile out;
    out.samples_used = samples;
    double n = static_cast<double>(samples);
    for (unsigned j = 0; j < m; ++j) {
        double mean = sum[j] / n;
        double var = std::max(0.0, sum_sq[j] / n - mean * mean);
        out.per_level_mi.push_back(std::clamp(1.0 - mean, 0.0, 1.0));
        out.standard_errors.push_back(std::sqrt(var / n));
    }
    double tot_mean = tot / n;
    double tot_var = std::max(0.0, tot_sq / n - tot_mean * tot_mean);
    out.sum_mi = m - tot_mean;
    out.sum_stderr = std::sqrt(tot_var / n);
    return out;
}

// Sum of the unconditional I(B_j; Y) divided by M, bits per slot. Undecided
// bits are marginalized uniformly, so each level LLR contrasts the two full
// half-sets of positions.
inline McEstimate bmd_rate(const ChannelParams& params, std::size_t samples,
                           RandomStream& rng) {
    detail::check_estimator_args(params, samples);
    unsigned m = params.levels();
    double beta = std::log1p(params.n_s / params.n_b);
    double sum = 0.0, sum_sq = 0.0;
    std::vector<double> delta(params.M);
    for (std::size_t i = 0; i < samples; ++i) {
        Label label = rng.bits(m);
        PhotonVector y = sample_symbol(map_label(label), params, rng);
        for (unsigned s = 0; s < params.M; ++s)
            delta[s] = beta * y[s] - params.n_s;
        double t = 0.0;
        for (unsigned j = 1; j <= m; ++j) {
            detail::LseAcc side[2];
            for (unsigned s = 0; s < params.M; ++s)
                side[(s >> (j - 1)) & 1u].add(delta[s]);
            double llr = side[0].value() - side[1].value();
            double sgn = label[j - 1] ? -1.0 : 1.0;
            t += detail::bits_of_nats(softplus(-sgn * llr));
        }
        double r = (m - t) / params.M;
        sum += r;
        sum_sq += r * r;
    }
    double n = static_cast<double>(samples);
    double mean = sum / n;
    double var = std::max(0.0, sum_sq / n - mean * mean);
    return {mean, std::sqrt(var / n), samples};
}

}  // namespace pcm
