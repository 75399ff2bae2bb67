#include <doctest.h>

#include <qkd/bits.hpp>
#include <qkd/gf64.hpp>
#include <qkd/rng.hpp>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

using namespace qkd;

namespace {

// independent GF(2^64) oracle: carry-less multiply into a 128-bit pair, then
// long division by x^64 + x^4 + x^3 + x + 1
std::uint64_t gf64_mul_oracle(std::uint64_t a, std::uint64_t b) {
    std::uint64_t lo = 0, hi = 0;
    for (int i = 0; i < 64; ++i) {
        if ((b >> i) & 1) {
            lo ^= a << i;
            if (i > 0) hi ^= a >> (64 - i);
        }
    }
    for (int j = 127; j >= 64; --j) {
        if ((hi >> (j - 64)) & 1) {
            hi ^= 1ull << (j - 64);
            int s = j - 64;  // fold the modulus tail 0x1b down by s
            std::uint64_t tail = 0x1bull;
            lo ^= tail << s;
            if (s > 0) hi ^= tail >> (64 - s);
        }
    }
    return lo;
}

std::uint64_t poly_hash_oracle(const std::vector<std::uint8_t>& bytes, std::uint64_t point) {
    std::uint64_t h = 0;
    std::size_t i = 0;
    while (i < bytes.size()) {
        std::uint64_t block = 0;
        for (int j = 0; j < 8 && i < bytes.size(); ++j, ++i)
            block |= static_cast<std::uint64_t>(bytes[i]) << (8 * j);
        h = gf64_mul_oracle(h ^ block, point);
    }
    return gf64_mul_oracle(h ^ (static_cast<std::uint64_t>(bytes.size()) * 8u), point);
}

} // namespace

TEST_SUITE("rng_bits") {

TEST_CASE("derive_seed gives distinct decorrelated streams") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t master : {0ull, 1ull, 42ull, ~0ull}) {
        for (std::uint64_t stream = 0; stream < 8; ++stream)
            seen.insert(derive_seed(master, stream));
    }
    CHECK(seen.size() == 32);
    CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}

TEST_CASE("rng streams are deterministic per seed") {
    Rng a(123), b(123), c(124);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 64; ++i) {
        std::uint64_t x = a.next_u64();
        all_equal = all_equal && x == b.next_u64();
        any_diff = any_diff || x != c.next_u64();
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform01 stays in [0,1) with the right mean") {
    Rng rng(5);
    const int n = 200000;
    double sum = 0.0;
    bool in_range = true;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform01();
        in_range = in_range && u >= 0.0 && u < 1.0;
        sum += u;
    }
    CHECK(in_range);
    // 5 sigma of the mean of n uniforms
    CHECK(std::abs(sum / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("bernoulli honors the edges and the probability") {
    Rng rng(9);
    CHECK_FALSE(rng.bernoulli(0.0));
    CHECK_FALSE(rng.bernoulli(-1.0));
    CHECK(rng.bernoulli(1.0));
    CHECK(rng.bernoulli(2.0));
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.3);
    CHECK(std::abs(hits / double(n) - 0.3) < 5.0 * std::sqrt(0.3 * 0.7 / n));
}

TEST_CASE("below covers the range uniformly and rejects zero") {
    Rng rng(11);
    CHECK_THROWS_AS(rng.below(0), std::invalid_argument);
    const std::uint64_t m = 7;
    const int n = 140000;
    std::vector<int> counts(m, 0);
    for (int i = 0; i < n; ++i) {
        std::uint64_t v = rng.below(m);
        REQUIRE(v < m);
        ++counts[v];
    }
    double expect = double(n) / m;
    double tol = 5.0 * std::sqrt(expect);
    for (auto c : counts) CHECK(std::abs(c - expect) < tol);
}

TEST_CASE("poisson sampling matches its first two moments") {
    Rng rng(13);
    CHECK(rng.poisson(0.0) == 0);
    CHECK_THROWS_AS(rng.poisson(-0.5), std::invalid_argument);
    CHECK_THROWS_AS(rng.poisson(81.0), std::invalid_argument);
    const double mu = 1.3;
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    int zeros = 0;
    for (int i = 0; i < n; ++i) {
        double k = rng.poisson(mu);
        sum += k;
        sq += k * k;
        zeros += k == 0;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK(std::abs(mean - mu) < 5.0 * std::sqrt(mu / n));
    CHECK(std::abs(var - mu) < 0.05);
    double p0 = std::exp(-mu);
    CHECK(std::abs(zeros / double(n) - p0) < 5.0 * std::sqrt(p0 * (1 - p0) / n));
}

TEST_CASE("bit packing uses LSB-first order") {
    Bits bits(70, 0);
    bits[0] = 1;
    bits[9] = 1;
    bits[63] = 1;
    bits[64] = 1;
    auto words = pack_bits(bits);
    REQUIRE(words.size() == 2);
    CHECK(words[0] == ((1ull << 0) | (1ull << 9) | (1ull << 63)));
    CHECK(words[1] == 1ull);
    auto bytes = bits_to_bytes(bits);
    REQUIRE(bytes.size() == 9);
    CHECK(bytes[0] == 0x01);
    CHECK(bytes[1] == 0x02);
    CHECK(bytes[7] == 0x80);
    CHECK(bytes[8] == 0x01);
}

TEST_CASE("bit string round trip and xor") {
    Bits b = bits_from_string("0110100");
    CHECK(bits_to_string(b) == "0110100");
    CHECK_THROWS_AS(bits_from_string("01x"), std::invalid_argument);
    CHECK_THROWS_AS(xor_bits(Bits{0, 1}, Bits{0}), std::invalid_argument);
    CHECK(xor_bits(bits_from_string("0101"), bits_from_string("0011")) == bits_from_string("0110"));
    CHECK(parity(b, 0, b.size()) == 1);
    CHECK(parity(b, 1, 3) == 0);
    CHECK(parity(b, 2, 2) == 0);
}

TEST_CASE("gf64 multiplication is a field operation") {
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        std::uint64_t a = rng.next_u64(), b = rng.next_u64(), c = rng.next_u64();
        CHECK(gf64_mul(a, 1) == a);
        CHECK(gf64_mul(a, 0) == 0);
        CHECK(gf64_mul(a, b) == gf64_mul(b, a));
        CHECK(gf64_mul(gf64_mul(a, b), c) == gf64_mul(a, gf64_mul(b, c)));
        CHECK(gf64_mul(a, b ^ c) == (gf64_mul(a, b) ^ gf64_mul(a, c)));
    }
}

TEST_CASE("gf64 multiplication matches the long-division oracle") {
    Rng rng(19);
    CHECK(gf64_mul(1ull << 63, 2) == 0x1b);  // one reduction step
    for (int i = 0; i < 500; ++i) {
        std::uint64_t a = rng.next_u64(), b = rng.next_u64();
        CHECK(gf64_mul(a, b) == gf64_mul_oracle(a, b));
    }
}

TEST_CASE("poly hash matches the oracle and separates lengths") {
    Rng rng(23);
    for (int len = 0; len <= 40; ++len) {
        std::vector<std::uint8_t> msg(len);
        for (auto& x : msg) x = static_cast<std::uint8_t>(rng.next_u64());
        std::uint64_t point = rng.next_u64() | 1;
        CHECK(poly_hash64(msg, point) == poly_hash_oracle(msg, point));
    }
    // trailing zero bytes must not collide thanks to the length fold
    std::uint64_t p = 0x9e3779b97f4a7c15ull;
    CHECK(poly_hash64(std::vector<std::uint8_t>{}, p) != poly_hash64(std::vector<std::uint8_t>{0}, p));
    CHECK(poly_hash64(std::vector<std::uint8_t>{0}, p) != poly_hash64(std::vector<std::uint8_t>{0, 0}, p));
}

} // TEST_SUITE
