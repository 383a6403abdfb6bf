#pragma once

#include <cmath>
#include <cstdint>

namespace gmr::rng {

// Counter-based generator: every draw is a pure function of
// (master_seed, path, step, draw index), so ensembles are independent of
// evaluation order and coupled simulations can replay identical increments.
//
// Mixing is chained splitmix64 (Steele et al., "Fast splittable pseudorandom
// number generators"). The algorithm is part of the file-format contract;
// regression vectors are pinned in the test suite.

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t path,
                                  std::uint64_t step, std::uint64_t draw) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ path);
    h = splitmix64(h ^ step);
    h = splitmix64(h ^ draw);
    return h;
}

/// Uniform on (0, 1]; never returns 0 so it is safe under log().
inline double uniform01(std::uint64_t seed, std::uint64_t path,
                        std::uint64_t step, std::uint64_t draw) {
    const std::uint64_t h = counter_hash(seed, path, step, draw);
    return static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal via Box-Muller; draw k consumes uniform counters 2k, 2k+1.
inline double gaussian(std::uint64_t seed, std::uint64_t path,
                       std::uint64_t step, std::uint64_t draw) {
    const double u1 = uniform01(seed, path, step, 2 * draw);
    const double u2 = uniform01(seed, path, step, 2 * draw + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace gmr::rng
