// Outer CRC in Koopman notation: the hex polynomial carries the x^degree
// term as its top bit and the +1 term is implicit, so the working generator
// is (poly << 1) | 1. Checksums are the remainder of m(x) * x^degree under
// MSB-first long division, appended MSB first.

#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pcm {

struct CrcSpec {
    unsigned degree = 0;
    std::uint64_t poly = 0;  // Koopman form

    CrcSpec() = default;

    CrcSpec(unsigned degree_, std::uint64_t poly_) : degree(degree_), poly(poly_) {
        if (degree < 1 || degree > 32)
            throw std::invalid_argument("CrcSpec: degree out of range");
        if (std::bit_width(poly) != static_cast<int>(degree))
            throw std::invalid_argument("CrcSpec: polynomial width must equal degree");
    }

    // full generator including the implicit +1, degree+1 bits
    std::uint64_t expanded() const { return (poly << 1) | 1u; }
};

namespace detail {

// remainder register after feeding `bits` MSB-first, then `pad` zero bits
inline std::uint64_t crc_divide(const std::vector<std::uint8_t>& bits, unsigned pad,
                                const CrcSpec& crc) {
    const std::uint64_t mask = (std::uint64_t{1} << crc.degree) - 1u;
    const std::uint64_t low = crc.expanded() & mask;  // generator minus its top term
    std::uint64_t reg = 0;
    auto feed = [&](std::uint64_t b) {
        std::uint64_t top = (reg >> (crc.degree - 1)) & 1u;
        reg = ((reg << 1) | b) & mask;
        if (top)
            reg ^= low;
    };
    for (std::uint8_t b : bits)
        feed(b & 1u);
    for (unsigned i = 0; i < pad; ++i)
        feed(0);
    return reg;
}

}  // namespace detail

inline std::vector<std::uint8_t> crc_append(const std::vector<std::uint8_t>& info,
                                            const CrcSpec& crc) {
    std::uint64_t rem = detail::crc_divide(info, crc.degree, crc);
    std::vector<std::uint8_t> out = info;
    for (unsigned i = 0; i < crc.degree; ++i)
        out.push_back(static_cast<std::uint8_t>((rem >> (crc.degree - 1 - i)) & 1u));
    return out;
}

inline bool crc_check(const std::vector<std::uint8_t>& bits, const CrcSpec& crc) {
    if (bits.size() < crc.degree)
        throw std::invalid_argument("crc_check: word shorter than the checksum");
    return detail::crc_divide(bits, 0, crc) == 0;
}

}  // namespace pcm
