#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace twoway {

/// SplitMix64 finaliser; used to derive independent stream seeds.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the stream addressed by `path` under `root`, e.g. (seed, replicate, method).
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(root);
  for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Index drawn from a discrete distribution given by `probs` (need not be normalised).
template <class Probs>
int draw_categorical(Rng& rng, const Probs& probs) {
  double total = 0.0;
  const int k = static_cast<int>(probs.size());
  for (int i = 0; i < k; ++i) total += probs(i);
  double x = uniform01(rng) * total;
  for (int i = 0; i < k - 1; ++i) {
    x -= probs(i);
    if (x < 0.0) return i;
  }
  return k - 1;
}

}  // namespace twoway
