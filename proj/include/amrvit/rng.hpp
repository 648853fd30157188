#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace amrvit {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive a stream seed from a master seed and up to two stream indices.
// Used to give every (epoch, sample) pair its own generator.
inline uint64_t mix_seed(uint64_t master, uint64_t a, uint64_t b = 0) {
    return splitmix64(splitmix64(master ^ splitmix64(a)) ^ splitmix64(b + 0x6a09e667f3bcc909ULL));
}

// Seedable generator. Normal draws use Box-Muller directly instead of
// std::normal_distribution so the byte stream does not depend on the
// standard library implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(splitmix64(seed)) {}

    uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    int64_t uniform_int(int64_t n) {
        // rejection sampling to avoid modulo bias
        const uint64_t un = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return static_cast<int64_t>(r % un);
    }

    double normal(double mean = 0.0, double sigma = 1.0) {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        return mean + sigma * z;
    }

    bool bernoulli(double p) { return uniform() < p; }

    Rng fork(uint64_t stream) { return Rng(mix_seed(next_u64(), stream)); }

private:
    std::mt19937_64 gen_;
};

}  // namespace amrvit
