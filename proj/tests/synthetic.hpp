#pragma once

// Synthetic discrete data with known generating structure, used to check
// structure discovery against ground truth.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causaltab/factors.hpp"
#include "causaltab/rng.hpp"

namespace synthetic {

inline int uniform_level(std::mt19937_64& gen, int levels) {
    return static_cast<int>(causaltab::rng::uniform_below(gen, static_cast<std::uint64_t>(levels)));
}

/// Chain f1 -> f2 -> f3: each child copies its parent with probability
/// 1 - noise, otherwise redraws uniformly. Noise below ~0.17 at n = 5000
/// starves the off-diagonal strata cells of the conditional G-test.
inline causaltab::FactorValueMatrix chain_data(int n, std::uint64_t seed, double noise = 0.2,
                                               int levels = 3) {
    auto gen = causaltab::rng::make_rng(seed, 100);
    causaltab::FactorValueMatrix out;
    out.factor_names = {"f1", "f2", "f3"};
    out.values.resize(n, 3);
    for (int r = 0; r < n; ++r) {
        const int f1 = uniform_level(gen, levels);
        const int f2 = causaltab::rng::uniform01(gen) < noise ? uniform_level(gen, levels) : f1;
        const int f3 = causaltab::rng::uniform01(gen) < noise ? uniform_level(gen, levels) : f2;
        out.values(r, 0) = f1;
        out.values(r, 1) = f2;
        out.values(r, 2) = f3;
    }
    return out;
}

/// Collider f1 -> f3 <- f2 with independent binary parents; f3 is the sum of
/// its parents, redrawn uniformly with probability noise. (An XOR collider
/// would be pairwise independent of each parent and invisible to PC.)
inline causaltab::FactorValueMatrix collider_data(int n, std::uint64_t seed, double noise = 0.1) {
    auto gen = causaltab::rng::make_rng(seed, 101);
    causaltab::FactorValueMatrix out;
    out.factor_names = {"f1", "f2", "f3"};
    out.values.resize(n, 3);
    for (int r = 0; r < n; ++r) {
        const int f1 = uniform_level(gen, 2);
        const int f2 = uniform_level(gen, 2);
        int f3 = f1 + f2;
        if (causaltab::rng::uniform01(gen) < noise) f3 = uniform_level(gen, 3);
        out.values(r, 0) = f1;
        out.values(r, 1) = f2;
        out.values(r, 2) = f3;
    }
    return out;
}

/// Y structure f1 -> f3 <- f2, f3 -> f4: the collider orients the upper
/// edges and Meek rule 1 then directs f3 -> f4.
inline causaltab::FactorValueMatrix y_structure_data(int n, std::uint64_t seed,
                                                     double noise = 0.2) {
    auto gen = causaltab::rng::make_rng(seed, 103);
    causaltab::FactorValueMatrix out;
    out.factor_names = {"f1", "f2", "f3", "f4"};
    out.values.resize(n, 4);
    for (int r = 0; r < n; ++r) {
        const int f1 = uniform_level(gen, 2);
        const int f2 = uniform_level(gen, 2);
        int f3 = f1 + f2;
        if (causaltab::rng::uniform01(gen) < noise) f3 = uniform_level(gen, 3);
        int f4 = f3;
        if (causaltab::rng::uniform01(gen) < noise) f4 = uniform_level(gen, 3);
        out.values(r, 0) = f1;
        out.values(r, 1) = f2;
        out.values(r, 2) = f3;
        out.values(r, 3) = f4;
    }
    return out;
}

/// k mutually independent uniform factors.
inline causaltab::FactorValueMatrix independent_data(int n, std::uint64_t seed, int k = 3,
                                                     int levels = 3) {
    auto gen = causaltab::rng::make_rng(seed, 102);
    causaltab::FactorValueMatrix out;
    for (int i = 0; i < k; ++i) out.factor_names.push_back("f" + std::to_string(i + 1));
    out.values.resize(n, k);
    for (int r = 0; r < n; ++r) {
        for (int i = 0; i < k; ++i) out.values(r, i) = uniform_level(gen, levels);
    }
    return out;
}

}  // namespace synthetic
