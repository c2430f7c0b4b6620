// Deterministic random streams. A seeded mt19937_64 supplies the raw bits;
// substreams for parallel shards are derived with splitmix64 so that results
// never depend on worker count or scheduling.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace pcm {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    int bit() { return static_cast<int>(eng_() >> 63); }

    std::vector<std::uint8_t> bits(std::size_t count) {
        std::vector<std::uint8_t> out(count);
        std::uint64_t word = 0;
        for (std::size_t i = 0; i < count; ++i) {
            if (i % 64 == 0)
                word = eng_();
            out[i] = static_cast<std::uint8_t>(word & 1);
            word >>= 1;
        }
        return out;
    }

    // Poisson draw: sequential inversion below rate 10, Hormann's PTRS
    // transformed rejection above it.
    std::uint32_t poisson(double rate) {
        if (!(rate > 0.0))
            return 0;
        if (rate < 10.0) {
            double p = std::exp(-rate);
            double cdf = p;
            double u = uniform();
            std::uint32_t k = 0;
            // bounded far beyond any mass reachable at rate < 10
            while (u > cdf && k < 400) {
                ++k;
                p *= rate / static_cast<double>(k);
                cdf += p;
            }
            return k;
        }
        const double b = 0.931 + 2.53 * std::sqrt(rate);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        const double log_rate = std::log(rate);
        for (;;) {
            double u = uniform() - 0.5;
            double v = uniform();
            double us = 0.5 - std::abs(u);
            double kf = std::floor((2.0 * a / us + b) * u + rate + 0.43);
            if (us >= 0.07 && v <= v_r)
                return static_cast<std::uint32_t>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us))
                continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                kf * log_rate - rate - std::lgamma(kf + 1.0))
                return static_cast<std::uint32_t>(kf);
        }
    }

private:
    std::mt19937_64 eng_;
};

// Substream `index` under a master seed. splitmix64 acts as a counter-based
// mixer, so consecutive indices land far apart in seed space.
inline RandomStream derive_stream(std::uint64_t master, std::uint64_t index) {
    return RandomStream(splitmix64(splitmix64(master) + index));
}

}  // namespace pcm
