#pragma once

#include <cstdint>
#include <random>

namespace nnc {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed for the i-th independent worker / read derived from a master seed:
// seed_i = mix64(mix64(master) ^ i).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(mix64(master) ^ index);
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace nnc
