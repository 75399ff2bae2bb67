#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd/rng.hpp"

namespace qkd {

// One bit per element, values restricted to 0/1. Plain vector keeps indexing
// and slicing trivial; nothing in this codebase is hot enough to justify a
// packed representation at the API boundary.
using Bits = std::vector<std::uint8_t>;

inline Bits random_bits(Rng& rng, std::size_t n) {
    Bits out(n);
    for (auto& b : out) b = rng.bit();
    return out;
}

inline Bits xor_bits(const Bits& a, const Bits& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("xor_bits: length mismatch");
    Bits out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
    return out;
}

inline int parity(const Bits& bits, std::size_t lo, std::size_t hi) {
    int p = 0;
    for (std::size_t i = lo; i < hi; ++i) p ^= bits[i];
    return p;
}

// little-endian packing, final partial word zero-padded
inline std::vector<std::uint64_t> pack_bits(const Bits& bits) {
    std::vector<std::uint64_t> words((bits.size() + 63) / 64, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) words[i >> 6] |= (1ull << (i & 63));
    return words;
}

inline std::vector<std::uint8_t> bits_to_bytes(const Bits& bits) {
    std::vector<std::uint8_t> bytes((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) bytes[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
    return bytes;
}

inline std::string bits_to_string(const Bits& bits) {
    std::string s;
    s.reserve(bits.size());
    for (auto b : bits) s.push_back(b ? '1' : '0');
    return s;
}

inline Bits bits_from_string(const std::string& s) {
    Bits out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '0') out.push_back(0);
        else if (c == '1') out.push_back(1);
        else throw std::invalid_argument("bits_from_string: expected only '0'/'1'");
    }
    return out;
}

} // namespace qkd
