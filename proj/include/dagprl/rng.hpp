#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dagprl {

using Rng = std::mt19937_64;

// SplitMix64 finalizer over (seed, stream). Every consumer of randomness gets
// its own stream id so that no two modules ever share an engine.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

// Stream ids used by the experiment driver.
namespace streams {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kModel = 2;
inline constexpr std::uint64_t kPolicy = 3;
inline constexpr std::uint64_t kEvaluation = 4;
inline constexpr std::uint64_t kNfq = 5;
inline constexpr std::uint64_t kGrid = 6;
}  // namespace streams

// std::normal_distribution carries hidden state between calls; a fresh
// Box-Muller draw keeps every consumer's stream position explicit.
inline double standard_normal(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double u1 = u(rng);
  while (u1 <= 0.0) u1 = u(rng);
  const double u2 = u(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return u(rng);
}

}  // namespace dagprl
