#pragma once

#include <cmath>
#include <cstdint>

namespace anklesim {

// splitmix64; stable across platforms so seeded runs replay bit-identically.
inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline double uniform01(uint64_t& state) {
    return (splitmix64(state) >> 11) * 0x1.0p-53;
}

// Box-Muller, one draw per call (the discarded twin keeps the call count
// independent of draw parity).
inline double gaussian(uint64_t& state) {
    double u1 = uniform01(state);
    double u2 = uniform01(state);
    if (u1 < 1.0e-300) u1 = 1.0e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Deterministic per-tick stream: mixes a run seed with a sample index so
// frames can be regenerated out of order.
inline uint64_t mix_seed(uint64_t seed, uint64_t tick) {
    uint64_t s = seed ^ (0x9E3779B97F4A7C15ull + tick * 0xD1B54A32D192ED03ull);
    splitmix64(s);
    return s;
}

}  // namespace anklesim
