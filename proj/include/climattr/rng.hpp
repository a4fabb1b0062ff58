#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace climattr::rng {

// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// One deterministic stream per (seed, cell). mt19937_64's output sequence is
// pinned by the standard, and the distributions below are hand-rolled, so a
// given (seed, cell) produces identical draws on every platform.
inline std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t cell) {
    std::uint64_t state = seed;
    std::uint64_t mixed = splitmix64(state);
    state ^= cell * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL;
    mixed ^= splitmix64(state);
    return std::mt19937_64(mixed);
}

// Uniform draw in (0, 1]; never zero, so it is safe under a logarithm.
inline double uniform01(std::mt19937_64& eng) {
    return static_cast<double>((eng() >> 11) + 1) * 0x1.0p-53;
}

// Box-Muller without a cached spare: two uniforms per normal draw.
inline double normal(std::mt19937_64& eng) {
    const double u1 = uniform01(eng);
    const double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double normal(std::mt19937_64& eng, double mean, double sd) {
    return mean + sd * normal(eng);
}

} // namespace climattr::rng
