// Slotted Poisson photon-counting channel. A PPM symbol occupies M slots;
// every slot sees n_b expected background photons and the pulsed slot adds
// n_s expected signal photons. Each slot count is an independent Poisson
// draw, so the per-slot statistics below are all the receiver ever needs.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pcm/rng.hpp"
#include "pcm/util.hpp"

namespace pcm {

// Photon counts for one received symbol, slot 0 first.
using PhotonVector = std::vector<std::uint32_t>;

struct ChannelParams {
    unsigned M;   // slots per symbol, power of two >= 2
    double n_s;   // mean signal photons in the pulsed slot
    double n_b;   // mean background photons per slot

    ChannelParams(unsigned M_, double n_s_, double n_b_) : M(M_), n_s(n_s_), n_b(n_b_) {
        if (M < 2 || !is_pow2(M))
            throw std::invalid_argument("ChannelParams: M must be a power of two >= 2");
        if (!(n_s >= 0.0) || !(n_b >= 0.0))
            throw std::invalid_argument("ChannelParams: photon rates must be non-negative");
    }

    unsigned levels() const { return ilog2(M); }
};

// Average signal photons per slot, expressed in dB on every x-axis.
inline double ns_from_pav_db(unsigned M, double pav_db) {
    return static_cast<double>(M) * db_to_linear(pav_db);
}

inline double pav_db_from_ns(unsigned M, double n_s) {
    return 10.0 * std::log10(n_s / static_cast<double>(M));
}

// ln P(y | pulsed), the Poisson log-pmf of one slot.
inline double slot_log_pmf(std::uint32_t y, bool pulsed, const ChannelParams& params) {
    double rate = params.n_b + (pulsed ? params.n_s : 0.0);
    if (rate == 0.0)
        return y == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return y * std::log(rate) - rate - std::lgamma(static_cast<double>(y) + 1.0);
}

// ln P(y|pulsed) - ln P(y|unpulsed) = y ln(1 + n_s/n_b) - n_s, the per-slot
// sufficient statistic. Affine in y, so it is cheap to tabulate.
inline double slot_llr_increment(std::uint32_t y, const ChannelParams& params) {
    if (!(params.n_b > 0.0))
        throw std::domain_error("slot_llr_increment: needs n_b > 0");
    return y * std::log1p(params.n_s / params.n_b) - params.n_s;
}

// Draw the M slot counts for a symbol whose pulse sits in slot d (1-based).
inline PhotonVector sample_symbol(unsigned pulse_position, const ChannelParams& params,
                                  RandomStream& rng) {
    if (pulse_position < 1 || pulse_position > params.M)
        throw std::invalid_argument("sample_symbol: pulse position out of range");
    PhotonVector counts(params.M);
    for (unsigned slot = 0; slot < params.M; ++slot) {
        double rate = params.n_b + (slot == pulse_position - 1 ? params.n_s : 0.0);
        counts[slot] = rng.poisson(rate);
    }
    return counts;
}

}  // namespace pcm
