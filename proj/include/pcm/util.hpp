// Shared numeric helpers: stable log-domain sums, the finite stand-in for
// infinite log-likelihood ratios, and round-trip-exact number formatting
// for the plain-text file formats.

#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace pcm {

// thrown when a requested configuration exceeds what the host can hold;
// callers may retry with a smaller list size
struct resource_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Large enough to dominate any metric that can occur in practice, small
// enough that adding a handful of them stays far from overflow.
inline constexpr double llr_cap = 1e30;

inline double clamp_llr(double x) {
    return std::clamp(x, -llr_cap, llr_cap);
}

// ln(1 + e^x), safe for any finite x.
inline double softplus(double x) {
    if (x > 36.0)
        return x;
    return std::log1p(std::exp(x));
}

// ln(e^a + e^b)
inline double log_sum_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity())
        return b;
    if (b == -std::numeric_limits<double>::infinity())
        return a;
    return std::max(a, b) + softplus(-std::abs(a - b));
}

// ln(sum e^{x_i}) with the usual max shift
inline double log_sum_exp(std::span<const double> xs) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : xs)
        hi = std::max(hi, x);
    if (hi == -std::numeric_limits<double>::infinity())
        return hi;
    double acc = 0.0;
    for (double x : xs)
        acc += std::exp(x - hi);
    return hi + std::log(acc);
}

inline bool is_pow2(unsigned long x) {
    return x > 0 && std::has_single_bit(x);
}

inline unsigned ilog2(unsigned long x) {
    return static_cast<unsigned>(std::bit_width(x) - 1);
}

// shortest decimal representation that parses back to the same double
inline std::string format_double(double value) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{})
        throw std::logic_error("format_double: buffer too small");
    return std::string(buf, ptr);
}

inline double db_to_linear(double db) {
    return std::pow(10.0, db / 10.0);
}

}  // namespace pcm
