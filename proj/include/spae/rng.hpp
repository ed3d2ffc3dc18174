// SPDX-License-Identifier: Apache-2.0
//
// Deterministic RNG streams. Every consumer derives its own stream from the
// master seed and a label path, so adding or removing one consumer (e.g. the
// probe pass) never shifts the draws seen by another.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace spae {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Mixes a master seed and a label path into one 64-bit stream seed.
inline std::uint64_t stream_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p));
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t master, std::initializer_list<std::uint64_t> path)
      : engine_(stream_seed(master, path)) {}

  // Uniform in [0, 1) with 53 random bits; identical across platforms.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t bits() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free modulo bias is negligible for the tiny n used here,
    // but keep it exact anyway.
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  // Samples an index from an unnormalized non-negative weight vector by CDF
  // scan. Returns the last index with positive weight on rounding overflow.
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    int last_pos = -1;
    for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
      if (weights[i] > 0.0) last_pos = i;
      u -= weights[i];
      if (u < 0.0 && weights[i] > 0.0) return i;
    }
    return last_pos;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace spae
