#pragma once

#include <cstdint>
#include <random>
#include <vector>

// Deterministic random helpers. std::uniform_*_distribution is
// implementation-defined, so every draw here is spelled out explicitly and
// produces the same stream on any platform.

namespace causaltab::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// One generator per (seed, stream) pair; distinct streams are independent
/// even for equal seeds.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t s = seed ^ (0x6a09e667f3bcc909ULL * (stream + 1));
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(stream), 0x9e3779b9u};
    return std::mt19937_64(seq);
}

/// Unbiased integer in [0, n) by rejection sampling.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = gen();
    } while (x >= limit);
    return x % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Fisher-Yates shuffle driven by uniform_below.
template <typename T>
void shuffle(std::vector<T>& values, std::mt19937_64& gen) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_below(gen, i));
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace causaltab::rng
