#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace metarule {

using Rng = std::mt19937_64;

// Derives an independent stream from a root seed and a path of indices
// (e.g. {seed, meta_step, problem}). Used wherever work could be split
// across workers without changing results.
inline Rng split_rng(std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(path.size() * 2);
  for (std::uint64_t v : path) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace metarule
