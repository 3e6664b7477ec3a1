#pragma once

#include <cstdint>
#include <random>

namespace snake_story {

// The engine stream. std::mt19937_64's output sequence is fixed by the
// standard, so states and draws are identical on every platform.
using Rng = std::mt19937_64;

// Uniform integer in [0, bound). Rejection sampling on raw 64-bit outputs:
// draws above the largest multiple of `bound` are discarded and redrawn.
// std::uniform_int_distribution is avoided because its algorithm is
// implementation-defined.
inline std::uint64_t draw_below(Rng& rng, std::uint64_t bound) {
    if (bound <= 1) {
        return 0;
    }
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x = rng();
    while (x >= limit) {
        x = rng();
    }
    return x % bound;
}

// Uniform double in [0, 1) from the top 53 bits of one output.
inline double draw_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// SplitMix64 finalizer, used to derive independent seeds from (seed, salt).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return mix64(seed ^ mix64(salt));
}

}  // namespace snake_story
