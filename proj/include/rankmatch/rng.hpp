#pragma once

#include <cstdint>
#include <random>

#include "rankmatch/stats.hpp"

namespace rankmatch {

// Seeded generator used by every stochastic routine in the library.
// The engine is std::mt19937_64 (bit-exact across platforms by the
// standard); all variate transforms are implemented here rather than
// with std::*_distribution, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Strictly inside (0,1): ((x >> 11) + 0.5) * 2^-53.
    double uniform01() {
        return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Inverse-CDF normal draw; keeps every sampler on one code path.
    double normal() { return normal_quantile(uniform01()); }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::mt19937_64 eng_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Deterministic per-stream sub-seed (e.g. one per Monte Carlo rep).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ splitmix64(stream * 0xD1342543DE82EF95ull + 1));
}

}  // namespace rankmatch
