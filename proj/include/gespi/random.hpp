#pragma once

// Seed derivation. Every random stream in the library is addressed by a path
// of integers under a master seed, so results never depend on scheduling.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gespi {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based child seed: derive_seed(s, {a, b, c}) depends only on the
/// path, never on the order in which siblings were drawn.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t step : path) h = splitmix64(h ^ splitmix64(step + 1));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master,
                    std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

/// Uniform draw in [0, 1) with 53 random bits; never returns 1.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace gespi
