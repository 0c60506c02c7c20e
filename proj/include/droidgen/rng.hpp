#ifndef DROIDGEN_RNG_HPP
#define DROIDGEN_RNG_HPP

#include <cassert>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

// Deterministic, platform-stable randomness. Every stochastic component of
// the toolkit draws from std::mt19937_64 (the algorithm is fully specified
// by the C++ standard) seeded through splitmix64, and maps raw 64-bit words
// to ranges itself instead of going through the standard distributions,
// whose output is implementation-defined.

namespace droidgen {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent per-item seed for stream `stream`, item `index`.
inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                           std::uint64_t index) {
    return splitmix64(splitmix64(base ^ stream) ^ index);
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::uint64_t stream,
                                std::uint64_t index) {
    return std::mt19937_64(derive_seed(base, stream, index));
}

// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased uniform integer in [0, n); rejection sampling over raw draws.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    assert(n > 0);
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x = rng();
    while (x >= limit) {
        x = rng();
    }
    return x % n;
}

// Fisher-Yates with uniform_below, so the permutation is platform-stable.
template <typename T>
void shuffle_stable(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace droidgen

#endif // DROIDGEN_RNG_HPP
