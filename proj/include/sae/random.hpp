#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sae {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the stream named `label` (and replicate `index`) under `root`.
/// Streams with different labels or indices are statistically independent.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                                    std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ fnv1a(label)) + splitmix64(index));
}

inline Rng make_rng(std::uint64_t root, std::string_view label, std::uint64_t index = 0) {
  return Rng(derive_seed(root, label, index));
}

/// Uniform draw on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  double u;
  do {
    u = std::generate_canonical<double, 53>(rng);
  } while (u <= 0.0);
  return u;
}

}  // namespace sae
