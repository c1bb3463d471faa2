#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>

namespace mtf {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. All derived seeds in the project go through this so
// that runs keyed by (base seed, index) never share generator state.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return mix64(mix64(base) ^ (index + 0x632be59bd9b4e019ULL));
}

// Seed for a sweep run: hash of the base seed and the IEEE-754 bit pattern of
// the swept value.
inline std::uint64_t derive_value_seed(std::uint64_t base, double value) {
  return derive_seed(base, std::bit_cast<std::uint64_t>(value));
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace mtf
