#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "cora/matrix.hpp"

namespace cora {

// Deterministic random source. mt19937_64 has a fully specified sequence;
// the uniform/normal transforms below are fixed here rather than taken from
// <random> distributions, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        std::uint64_t x, r;
        do {
            x = gen_();
            r = x % n;
        } while (x - r > static_cast<std::uint64_t>(-n));
        return r;
    }

    // Standard normal via Box-Muller, one spare cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 == 0.0);
        u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * M_PI * u2;
        spare_ = mag * std::sin(ang);
        have_spare_ = true;
        return mag * std::cos(ang);
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
    Matrix m(rows, cols);
    for (double& v : m.data()) {
        v = stddev * rng.normal();
    }
    return m;
}

// Stream splitter for deriving independent sub-seeds from one run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace cora
