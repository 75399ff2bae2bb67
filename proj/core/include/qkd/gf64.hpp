#pragma once

#include <cstdint>
#include <span>

namespace qkd {

// GF(2^64) with reduction polynomial x^64 + x^4 + x^3 + x + 1.
// Shift-and-xor multiply, no carryless-multiply intrinsics; messages here are
// short enough that this is never a bottleneck.
inline std::uint64_t gf64_mul(std::uint64_t a, std::uint64_t b) {
    constexpr std::uint64_t reduction = 0x1bull;
    std::uint64_t acc = 0;
    for (int i = 0; i < 64; ++i) {
        if (b & 1) acc ^= a;
        b >>= 1;
        std::uint64_t carry = a >> 63;
        a <<= 1;
        if (carry) a ^= reduction;
    }
    return acc;
}

// Polynomial evaluation hash over 64-bit blocks (little-endian, zero padded),
// with the bit length folded in as a final block so messages that differ only
// by trailing zero padding hash apart.
inline std::uint64_t poly_hash64(std::span<const std::uint8_t> bytes, std::uint64_t point) {
    std::uint64_t h = 0;
    std::size_t i = 0;
    while (i < bytes.size()) {
        std::uint64_t block = 0;
        for (int j = 0; j < 8 && i < bytes.size(); ++j, ++i)
            block |= static_cast<std::uint64_t>(bytes[i]) << (8 * j);
        h = gf64_mul(h ^ block, point);
    }
    h = gf64_mul(h ^ (static_cast<std::uint64_t>(bytes.size()) * 8u), point);
    return h;
}

} // namespace qkd
