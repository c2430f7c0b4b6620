// Frozen-set construction: Monte Carlo genie-aided SC counting, and the two
// surrogate-channel recursions (Gaussian approximation on mutual informations,
// binary erasure twin).  All constructions rank the mn synthetic positions of
// the multilevel chain and freeze the globally worst ones.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pcm/channel.hpp"
#include "pcm/modulation.hpp"
#include "pcm/polar.hpp"
#include "pcm/rng.hpp"
#include "pcm/util.hpp"

namespace pcm {

enum class SurrogateRule { ga, bec };
enum class ConstructionMethod { mc, mi_dga, mi_dbec };

inline const char* method_name(ConstructionMethod method) {
    switch (method) {
        case ConstructionMethod::mc: return "mc";
        case ConstructionMethod::mi_dga: return "mi-dga";
        case ConstructionMethod::mi_dbec: return "mi-dbec";
    }
    throw std::logic_error("unknown construction method");
}

// Per-position figure of merit over the mn bits of the multilevel input
// vector, level 1 (label LSB) first.  Mutual informations for the surrogate
// constructions, raw error counts for the Monte Carlo one.
struct ReliabilityProfile {
    std::vector<double> values;
    ConstructionMethod method;
};

namespace detail {
inline constexpr double j_h1 = 0.3073;
inline constexpr double j_h2 = 0.8935;
inline constexpr double j_h3 = 1.1064;
// The closed-form fit diverges at I = 1; saturate just below it so j_inv
// returns a large finite sigma instead of infinity.
inline constexpr double j_saturation = 1.0 - 1e-12;
}  // namespace detail

// Mutual information of a biAWGN channel whose LLRs are N(sigma^2/2, sigma^2),
// via the standard three-constant exponential fit.
inline double j_fun(double sigma) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("j_fun: sigma must be >= 0");
    if (sigma == 0.0) return 0.0;
    double inner = -std::expm1(-detail::j_h1 * std::pow(sigma, 2.0 * detail::j_h2) * std::numbers::ln2);
    double value = std::pow(inner, detail::j_h3);
    return std::clamp(value, 0.0, 1.0);
}

inline double j_inv(double mi) {
    if (!(mi >= 0.0 && mi <= 1.0)) throw std::invalid_argument("j_inv: mi must be in [0,1]");
    mi = std::min(mi, detail::j_saturation);
    if (mi == 0.0) return 0.0;
    double inner = -std::log2(1.0 - std::pow(mi, 1.0 / detail::j_h3)) / detail::j_h1;
    return std::pow(inner, 0.5 / detail::j_h2);
}

// One step of the basic polar transform in the mutual-information domain.
inline std::pair<double, double> ga_transform(double i1, double i2) {
    if (!(i1 >= 0.0 && i1 <= 1.0 && i2 >= 0.0 && i2 <= 1.0))
        throw std::invalid_argument("ga_transform: inputs must be in [0,1]");
    double minus = 1.0 - j_fun(std::hypot(j_inv(1.0 - i1), j_inv(1.0 - i2)));
    double plus = j_fun(std::hypot(j_inv(i1), j_inv(i2)));
    return {std::clamp(minus, 0.0, 1.0), std::clamp(plus, 0.0, 1.0)};
}

// Same step for erasure probabilities of a BEC.
inline std::pair<double, double> bec_transform(double e1, double e2) {
    if (!(e1 >= 0.0 && e1 <= 1.0 && e2 >= 0.0 && e2 <= 1.0))
        throw std::invalid_argument("bec_transform: inputs must be in [0,1]");
    return {e1 + e2 - e1 * e2, e1 * e2};
}

namespace detail {

// Recurses over leaves given in channel (symbol) order and returns one value
// per input position in decoding-phase order: minus outputs form the first
// half, plus outputs the second, matching the encoder's index convention.
template <typename Transform>
std::vector<double> evolve_tree(std::vector<double> leaves, Transform&& step) {
    if (leaves.size() <= 1) return leaves;
    size_t half = leaves.size() / 2;
    std::vector<double> minus(half);
    std::vector<double> plus(half);
    for (size_t t = 0; t < half; ++t)
        std::tie(minus[t], plus[t]) = step(leaves[2 * t], leaves[2 * t + 1]);
    std::vector<double> out = evolve_tree(std::move(minus), step);
    std::vector<double> upper = evolve_tree(std::move(plus), step);
    out.insert(out.end(), upper.begin(), upper.end());
    return out;
}

}  // namespace detail

// Evolves per-symbol leaf reliabilities through the full transform.  Leaves
// are mutual informations for the GA rule and erasure probabilities for the
// BEC rule; either way the result is in "higher is better" units (MI, or
// 1 - erasure probability).  The vector overload takes one leaf per symbol in
// channel order, which is how shortened positions are seeded as perfect.
inline std::vector<double> evolve_reliabilities(std::vector<double> leaves, SurrogateRule rule) {
    if (leaves.empty() || !is_pow2(leaves.size()))
        throw std::invalid_argument("evolve_reliabilities: leaf count must be a power of two");
    for (double v : leaves)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("evolve_reliabilities: leaves must be in [0,1]");
    std::vector<double> out;
    if (rule == SurrogateRule::ga) {
        out = detail::evolve_tree(std::move(leaves), [](double a, double b) { return ga_transform(a, b); });
    } else {
        out = detail::evolve_tree(std::move(leaves), [](double a, double b) { return bec_transform(a, b); });
        for (double& v : out) v = 1.0 - v;
    }
    return out;
}

inline std::vector<double> evolve_reliabilities(double leaf, size_t n, SurrogateRule rule) {
    return evolve_reliabilities(std::vector<double>(n, leaf), rule);
}

// Code geometry a construction has to fill in: transform length, number of
// symbols actually transmitted, information payload, and the optional CRC
// whose bits ride inside the unfrozen set.
struct ConstructionTarget {
    unsigned n = 0;
    unsigned n_used = 0;
    unsigned k_info = 0;
    std::optional<CrcSpec> crc;

    unsigned k_total() const { return k_info + (crc ? crc->degree : 0u); }
};

namespace detail {

inline void check_target(const ConstructionTarget& target, unsigned m) {
    if (target.n == 0 || !is_pow2(target.n))
        throw std::invalid_argument("construction: n must be a power of two");
    if (target.n_used == 0 || target.n_used > target.n)
        throw std::invalid_argument("construction: n_used must be in [1, n]");
    if (target.k_info == 0) throw std::invalid_argument("construction: k_info must be positive");
    if (target.k_total() > static_cast<uint64_t>(m) * target.n_used)
        throw std::invalid_argument("construction: k_total exceeds the block size");
}

// Freezes the worst positions by an externally supplied strict ordering
// (comp(a, b) true when a freezes before b).  Shortened positions are frozen
// unconditionally and do not consume the budget-by-merit.
template <typename Compare>
std::vector<std::uint8_t> freeze_by_order(const ConstructionTarget& target, unsigned m, Compare comp) {
    size_t mn = static_cast<size_t>(m) * target.n;
    std::vector<std::uint8_t> frozen(mn, 0);
    std::vector<size_t> usable;
    usable.reserve(mn);
    for (size_t g = 0; g < mn; ++g) {
        unsigned i = static_cast<unsigned>(g % target.n);
        if (is_shortened_position(i, target.n, target.n_used))
            frozen[g] = 1;
        else
            usable.push_back(g);
    }
    size_t budget = mn - target.k_total() - static_cast<size_t>(m) * (target.n - target.n_used);
    std::nth_element(usable.begin(), usable.begin() + budget, usable.end(), comp);
    for (size_t idx = 0; idx < budget; ++idx) frozen[usable[idx]] = 1;
    return frozen;
}

inline CodeSpec make_spec(const ConstructionTarget& target, unsigned m, std::vector<std::uint8_t> frozen) {
    CodeSpec spec;
    spec.n = target.n;
    spec.m = m;
    spec.n_used = target.n_used;
    spec.frozen = std::move(frozen);
    spec.k_info = target.k_info;
    spec.crc = target.crc;
    validate_code_spec(spec);
    return spec;
}

// Reliability values over all mn positions for a given per-level MI seed.
// Shortened symbols enter as perfect channels.
inline std::vector<double> surrogate_values(const std::vector<double>& level_mi,
                                            const ConstructionTarget& target, SurrogateRule rule) {
    std::vector<double> values;
    values.reserve(level_mi.size() * target.n);
    for (double mi : level_mi) {
        if (!(mi >= 0.0 && mi <= 1.0))
            throw std::invalid_argument("construction: per-level MI must be in [0,1]");
        double leaf = rule == SurrogateRule::ga ? mi : 1.0 - mi;
        double shortened_leaf = rule == SurrogateRule::ga ? 1.0 : 0.0;
        std::vector<double> leaves(target.n, leaf);
        for (unsigned t = target.n_used; t < target.n; ++t) leaves[t] = shortened_leaf;
        std::vector<double> evolved = evolve_reliabilities(std::move(leaves), rule);
        values.insert(values.end(), evolved.begin(), evolved.end());
    }
    return values;
}

}  // namespace detail

inline ReliabilityProfile surrogate_reliabilities(const MiProfile& profile, const ConstructionTarget& target,
                                                  SurrogateRule rule) {
    unsigned m = static_cast<unsigned>(profile.per_level_mi.size());
    detail::check_target(target, m);
    ReliabilityProfile out;
    out.values = detail::surrogate_values(profile.per_level_mi, target, rule);
    out.method = rule == SurrogateRule::ga ? ConstructionMethod::mi_dga : ConstructionMethod::mi_dbec;
    return out;
}

// Surrogate construction: evolve each level's demapper MI through the
// transform and freeze the globally smallest reliabilities.  Ties freeze the
// higher position index first.
inline CodeSpec construct_surrogate(const MiProfile& profile, const ConstructionTarget& target,
                                    SurrogateRule rule) {
    unsigned m = static_cast<unsigned>(profile.per_level_mi.size());
    if (m == 0) throw std::invalid_argument("construct_surrogate: empty MI profile");
    ReliabilityProfile rel = surrogate_reliabilities(profile, target, rule);
    auto comp = [&rel](size_t a, size_t b) {
        if (rel.values[a] != rel.values[b]) return rel.values[a] < rel.values[b];
        return a > b;
    };
    return detail::make_spec(target, m, detail::freeze_by_order(target, m, comp));
}

namespace detail {

// Genie-aided SC pass over one level: every decision is compared against the
// true bit and then corrected, so errors count first-error events per
// position.  Returns the codeword segment implied by the true bits.
inline std::vector<std::uint8_t> genie_sc_rec(const LlrWord& llrs, const std::uint8_t* truth,
                                              std::uint64_t* errors) {
    size_t n = llrs.size();
    if (n == 1) {
        std::uint8_t decision = llrs[0] < 0.0 ? 1 : 0;
        if (decision != truth[0]) ++errors[0];
        return {truth[0]};
    }
    size_t half = n / 2;
    LlrWord sub(half);
    for (size_t i = 0; i < half; ++i) sub[i] = f_node(llrs[2 * i], llrs[2 * i + 1], false);
    std::vector<std::uint8_t> left = genie_sc_rec(sub, truth, errors);
    for (size_t i = 0; i < half; ++i) sub[i] = g_node(llrs[2 * i], llrs[2 * i + 1], left[i]);
    std::vector<std::uint8_t> right = genie_sc_rec(sub, truth + half, errors + half);
    std::vector<std::uint8_t> word(n);
    for (size_t i = 0; i < half; ++i) {
        word[2 * i] = left[i] ^ right[i];
        word[2 * i + 1] = right[i];
    }
    return word;
}

// Per-level demapper MI seeds used for ordering positions when Monte Carlo
// counts tie (including the all-zero noiseless case, where the ordering
// degenerates to the GA surrogate's).
inline std::vector<double> tiebreak_level_mi(const ChannelParams& params, uint64_t trials,
                                             RandomStream& stream) {
    unsigned m = params.levels();
    if (params.n_b == 0.0) {
        // Noiseless channel: a nonzero observation pins the symbol exactly, so
        // every level's MI is the probability of seeing at least one photon.
        return std::vector<double>(m, -std::expm1(-params.n_s));
    }
    uint64_t samples = std::clamp<uint64_t>(trials, 10000, 100000);
    MiProfile profile = level_mi_profile(params, samples, stream);
    return profile.per_level_mi;
}

}  // namespace detail

// Raw genie-aided SC error counts per position, sharded over per-trial
// derived streams so results do not depend on any execution interleaving.
inline ReliabilityProfile mc_error_counts(const ChannelParams& params, const ConstructionTarget& target,
                                          uint64_t trials, RandomStream& stream) {
    unsigned m = params.levels();
    detail::check_target(target, m);
    if (trials < 1000) throw std::invalid_argument("mc_error_counts: need at least 1000 trials");

    size_t n = target.n;
    size_t mn = m * n;
    std::vector<std::uint64_t> counts(mn, 0);
    uint64_t trial_seed = stream.next_u64();

    bool noiseless = params.n_b == 0.0;
    std::vector<std::vector<std::uint8_t>> truth(m, std::vector<std::uint8_t>(n));
    std::vector<std::vector<std::uint8_t>> words(m);
    std::vector<std::uint32_t> symbols(n);
    LlrWord llrs(n);

    for (uint64_t trial = 0; trial < trials; ++trial) {
        RandomStream rng = derive_stream(trial_seed, trial);
        for (unsigned j = 0; j < m; ++j) {
            for (size_t i = 0; i < n; ++i)
                truth[j][i] = is_shortened_position(static_cast<unsigned>(i), target.n, target.n_used)
                                  ? 0
                                  : static_cast<std::uint8_t>(rng.bit());
            words[j] = level_codeword(truth[j]);
        }
        for (size_t t = 0; t < n; ++t) {
            std::uint32_t d = 1;
            for (unsigned j = 0; j < m; ++j) d += static_cast<std::uint32_t>(words[j][t]) << j;
            symbols[t] = d;
        }
        std::vector<PhotonVector> obs(target.n_used);
        std::vector<DemapTable> tables(noiseless ? 0 : target.n_used);
        for (unsigned t = 0; t < target.n_used; ++t) {
            obs[t] = sample_symbol(symbols[t], params, rng);
            if (!noiseless) tables[t].build(obs[t], params);
        }
        for (unsigned j = 0; j < m; ++j) {
            for (size_t t = 0; t < n; ++t) {
                if (t >= target.n_used) {
                    llrs[t] = llr_cap;
                    continue;
                }
                std::uint32_t prefix = (symbols[t] - 1) & ((1u << j) - 1u);
                if (noiseless) {
                    Label bits(j);
                    for (unsigned b = 0; b < j; ++b) bits[b] = (prefix >> b) & 1u;
                    llrs[t] = clamp_llr(demap_level(obs[t], j + 1, bits, params));
                } else {
                    llrs[t] = clamp_llr(tables[t].llr(j + 1, prefix));
                }
            }
            detail::genie_sc_rec(llrs, truth[j].data(), counts.data() + static_cast<size_t>(j) * n);
        }
    }

    ReliabilityProfile out;
    out.values.assign(counts.begin(), counts.end());
    out.method = ConstructionMethod::mc;
    return out;
}

// Monte Carlo construction: freeze the positions with the most genie-SC
// first-decision errors.  Tied counts are ordered by the GA surrogate
// reliability, then by freezing the higher index first.
inline CodeSpec construct_mc(const ChannelParams& params, const ConstructionTarget& target, uint64_t trials,
                             RandomStream& stream) {
    unsigned m = params.levels();
    detail::check_target(target, m);
    std::vector<double> level_mi = detail::tiebreak_level_mi(params, trials, stream);
    std::vector<double> surrogate = detail::surrogate_values(level_mi, target, SurrogateRule::ga);
    ReliabilityProfile counts = mc_error_counts(params, target, trials, stream);
    auto comp = [&](size_t a, size_t b) {
        if (counts.values[a] != counts.values[b]) return counts.values[a] > counts.values[b];
        if (surrogate[a] != surrogate[b]) return surrogate[a] < surrogate[b];
        return a > b;
    };
    return detail::make_spec(target, m, detail::freeze_by_order(target, m, comp));
}

// Wilson score interval for an error count out of `trials` at confidence
// multiplier z, used to report how well separated Monte Carlo positions are.
struct WilsonInterval {
    double lo = 0.0;
    double hi = 0.0;
};

inline WilsonInterval wilson_interval(uint64_t errors, uint64_t trials, double z = 1.96) {
    if (trials == 0) throw std::invalid_argument("wilson_interval: trials must be positive");
    if (errors > trials) throw std::invalid_argument("wilson_interval: errors exceed trials");
    double nd = static_cast<double>(trials);
    double p = static_cast<double>(errors) / nd;
    double z2 = z * z;
    double denom = 1.0 + z2 / nd;
    double center = p + z2 / (2.0 * nd);
    double spread = z * std::sqrt(p * (1.0 - p) / nd + z2 / (4.0 * nd * nd));
    return {std::max(0.0, (center - spread) / denom), std::min(1.0, (center + spread) / denom)};
}

}  // namespace pcm
