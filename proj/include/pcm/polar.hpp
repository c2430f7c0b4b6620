// Polar transform, code description, and plain successive cancellation.
//
// polar_transform is the raw natural-order butterfly c = u F^{(x) log2 n}.
// Encoding feeds each level through a bit-reversal permutation first, the
// usual companion of the successive cancellation schedule: that way the
// decoder's decision order equals the u~ index order used by frozen masks,
// code files and the construction module. The codebook is unchanged, only
// the labelling of input positions.
//
// Shortening pins trailing codeword positions to zero. In this indexing the
// u positions that must be frozen for that are the bit-reversed images of
// the trailing columns, i.e. scattered over the word: row i of the permuted
// transform has its last support column at bitrev(i).

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pcm/crc.hpp"
#include "pcm/modulation.hpp"
#include "pcm/util.hpp"

namespace pcm {

using LlrWord = std::vector<double>;

struct DecoderOptions {
    bool min_sum = false;       // drop the boxplus correction terms
    bool approx_metric = false; // penalty |L| on a sign mismatch instead of ln(1+e^-|L|)
};

inline std::uint32_t reverse_bits(std::uint32_t x, unsigned bits) {
    std::uint32_t r = 0;
    for (unsigned i = 0; i < bits; ++i)
        r |= ((x >> i) & 1u) << (bits - 1 - i);
    return r;
}

// true when u position i (decoder order) feeds codeword columns >= n_used
inline bool is_shortened_position(unsigned i, unsigned n, unsigned n_used) {
    return reverse_bits(i, ilog2(n)) >= n_used;
}

// One multilevel code: m polar codes of length n sharing a frozen mask over
// the stacked input word u~ = (u_1 .. u_m), all indices in decoder order.
// Only the first n_used symbols are transmitted; the shortening positions of
// every level are frozen so the trailing codeword bits are known zeros.
struct CodeSpec {
    unsigned n = 0;
    unsigned m = 0;
    unsigned n_used = 0;
    std::vector<std::uint8_t> frozen;  // mn flags, true = frozen to 0
    unsigned k_info = 0;
    std::optional<CrcSpec> crc;

    unsigned M() const { return 1u << m; }
    unsigned block_bits() const { return m * n_used; }
    unsigned k_total() const { return k_info + (crc ? crc->degree : 0u); }
    double rate() const { return static_cast<double>(k_info) / block_bits(); }
};

inline void validate_code_spec(const CodeSpec& spec) {
    if (!is_pow2(spec.n))
        throw std::invalid_argument("CodeSpec: n must be a power of two");
    if (spec.m < 1 || spec.m > 30)
        throw std::invalid_argument("CodeSpec: level count out of range");
    if (spec.n_used < 1 || spec.n_used > spec.n)
        throw std::invalid_argument("CodeSpec: n_used must be in 1..n");
    if (spec.frozen.size() != static_cast<std::size_t>(spec.m) * spec.n)
        throw std::invalid_argument("CodeSpec: frozen mask must cover all mn positions");
    std::size_t frozen_count = 0;
    for (std::uint8_t f : spec.frozen)
        frozen_count += (f != 0);
    if (frozen_count + spec.k_total() != static_cast<std::size_t>(spec.m) * spec.n)
        throw std::invalid_argument("CodeSpec: frozen count inconsistent with k_info and CRC");
    for (unsigned level = 0; level < spec.m; ++level)
        for (unsigned i = 0; i < spec.n; ++i)
            if (is_shortened_position(i, spec.n, spec.n_used) &&
                !spec.frozen[static_cast<std::size_t>(level) * spec.n + i])
                throw std::invalid_argument("CodeSpec: shortening positions must be frozen");
}

inline void polar_transform_inplace(std::span<std::uint8_t> bits) {
    if (!is_pow2(bits.size()))
        throw std::invalid_argument("polar_transform: length must be a power of two");
    for (std::size_t inc = 1; inc < bits.size(); inc <<= 1)
        for (std::size_t base = 0; base < bits.size(); base += inc << 1)
            for (std::size_t off = 0; off < inc; ++off)
                bits[base + off] ^= bits[base + inc + off];
}

inline std::vector<std::uint8_t> polar_transform(std::vector<std::uint8_t> bits) {
    polar_transform_inplace(bits);
    return bits;
}

inline void bit_reverse_permute(std::span<std::uint8_t> v) {
    unsigned s = ilog2(v.size());
    for (std::uint32_t i = 0; i < v.size(); ++i) {
        std::uint32_t r = reverse_bits(i, s);
        if (r > i)
            std::swap(v[i], v[r]);
    }
}

// codeword of one level from its u word in decoder order
inline std::vector<std::uint8_t> level_codeword(std::vector<std::uint8_t> u) {
    bit_reverse_permute(u);
    polar_transform_inplace(u);
    return u;
}

struct Encoded {
    std::vector<std::vector<std::uint8_t>> levels;  // m codewords of length n
    std::vector<unsigned> positions;                // pulse positions, first n_used symbols
};

// Place info (+CRC) into the unfrozen positions of u~ in ascending index
// order, zeros elsewhere, transform each level, and read one label per
// symbol across levels.
inline Encoded encode(const std::vector<std::uint8_t>& info, const CodeSpec& spec) {
    validate_code_spec(spec);
    if (info.size() != spec.k_info)
        throw std::invalid_argument("encode: info length != k_info");
    std::vector<std::uint8_t> payload = spec.crc ? crc_append(info, *spec.crc) : info;

    Encoded out;
    out.levels.assign(spec.m, std::vector<std::uint8_t>(spec.n, 0));
    std::size_t next = 0;
    for (std::size_t idx = 0; idx < spec.frozen.size(); ++idx)
        if (!spec.frozen[idx])
            out.levels[idx / spec.n][idx % spec.n] = payload.at(next++);
    for (auto& level : out.levels)
        level = level_codeword(std::move(level));

    out.positions.resize(spec.n_used);
    for (unsigned i = 0; i < spec.n_used; ++i) {
        Label label(spec.m);
        for (unsigned j = 0; j < spec.m; ++j)
            label[j] = out.levels[j][i];
        out.positions[i] = map_label(label);
    }
    return out;
}

namespace detail {

// exact boxplus; the two correction terms vanish under min-sum
inline double f_node(double a, double b, bool min_sum) {
    double sign = ((a < 0) != (b < 0)) ? -1.0 : 1.0;
    double v = sign * std::min(std::abs(a), std::abs(b));
    if (min_sum)
        return v;
    return v + std::log1p(std::exp(-std::abs(a + b))) - std::log1p(std::exp(-std::abs(a - b)));
}

inline double g_node(double a, double b, std::uint8_t u) {
    return u ? b - a : b + a;
}

// metric penalty for deciding bit u against LLR l
inline double metric_penalty(double l, std::uint8_t u, bool approx) {
    double x = u ? l : -l;  // positive part when the decision contradicts the sign
    if (approx)
        return x > 0.0 ? x : 0.0;
    return softplus(x);
}

// Plain SC over one level: the left half of u rides the f-combined channel
// pairs, the right half the g-combined ones. Returns the codeword of the
// decoded segment so the caller can apply its own g step.
inline std::vector<std::uint8_t> sc_rec(std::span<const double> llr,
                                        std::span<const std::uint8_t> frozen,
                                        std::span<std::uint8_t> u, bool min_sum) {
    std::size_t n = llr.size();
    if (n == 1) {
        u[0] = frozen[0] ? 0 : (llr[0] < 0.0);
        return {u[0]};
    }
    std::size_t half = n / 2;
    std::vector<double> sub(half);
    for (std::size_t i = 0; i < half; ++i)
        sub[i] = f_node(llr[2 * i], llr[2 * i + 1], min_sum);
    std::vector<std::uint8_t> c_left = sc_rec(sub, frozen.first(half), u.first(half), min_sum);
    for (std::size_t i = 0; i < half; ++i)
        sub[i] = g_node(llr[2 * i], llr[2 * i + 1], c_left[i]);
    std::vector<std::uint8_t> c_right =
        sc_rec(sub, frozen.subspan(half), u.subspan(half), min_sum);
    std::vector<std::uint8_t> c(n);
    for (std::size_t i = 0; i < half; ++i) {
        c[2 * i] = c_left[i] ^ c_right[i];
        c[2 * i + 1] = c_right[i];
    }
    return c;
}

}  // namespace detail

inline std::vector<std::uint8_t> sc_decode(const LlrWord& llrs,
                                           const std::vector<std::uint8_t>& frozen,
                                           DecoderOptions opts = {}) {
    if (!is_pow2(llrs.size()))
        throw std::invalid_argument("sc_decode: length must be a power of two");
    if (frozen.size() != llrs.size())
        throw std::invalid_argument("sc_decode: frozen mask length mismatch");
    std::vector<std::uint8_t> u(llrs.size());
    detail::sc_rec(llrs, frozen, u, opts.min_sum);
    return u;
}

}  // namespace pcm
