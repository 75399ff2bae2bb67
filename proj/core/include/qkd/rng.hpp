#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace qkd {

// All randomness in the library flows through this wrapper. The engine is
// mt19937_64 (portable output sequence per the standard) and every transform
// on top of it is pinned here, so a (seed, draw order) pair fully determines
// a run. Never reach for std:: distributions: their output is
// implementation-defined and would break transcript reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0,1) with 53 significant bits
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform01() < p;
    }

    std::uint8_t bit() { return static_cast<std::uint8_t>(eng_() >> 63); }

    // unbiased integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        std::uint64_t threshold = -n % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t x = eng_();
            if (x >= threshold) return x % n;
        }
    }

    // inversion by sequential search; adequate for the mean photon numbers
    // used here (mu of order 1)
    std::uint32_t poisson(double mu) {
        if (mu < 0.0) throw std::invalid_argument("Rng::poisson: negative mean");
        if (mu == 0.0) return 0;
        if (mu > 80.0) throw std::invalid_argument("Rng::poisson: mean out of supported range");
        double u = uniform01();
        double p = std::exp(-mu);
        double cdf = p;
        std::uint32_t k = 0;
        while (u >= cdf && k < 4096) {
            ++k;
            p *= mu / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

private:
    std::mt19937_64 eng_;
};

// splitmix64, used to derive decorrelated stream seeds from one master seed
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master ^ (0xa0761d6478bd642full * (stream + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

} // namespace qkd
