#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tmvr {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Independent stream for a named component of a run. The same (root, label)
// pair always yields the same seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  return splitmix64(splitmix64(root) ^ fnv1a64(label));
}

inline Rng make_rng(std::uint64_t root, std::string_view label) {
  return Rng(derive_seed(root, label));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace tmvr
