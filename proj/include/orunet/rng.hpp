#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace orunet {

using Rng = std::mt19937_64;

/// All randomness in a run flows from one master seed, fanned out into
/// independent substreams by purpose label ("init", "patch", "augment", ...).
inline Rng make_rng(uint64_t seed) { return Rng(seed); }

inline uint64_t hash_label(std::string_view label) {
  // FNV-1a
  uint64_t h = 1469598103934665603ull;
  for (char ch : label) {
    h ^= static_cast<uint64_t>(static_cast<unsigned char>(ch));
    h *= 1099511628211ull;
  }
  return h;
}

inline Rng substream(uint64_t seed, std::string_view label) {
  std::seed_seq seq{seed, hash_label(label)};
  return Rng(seq);
}

inline int64_t uniform_int(Rng& rng, int64_t lo, int64_t hi) {
  std::uniform_int_distribution<int64_t> d(lo, hi);
  return d(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

}  // namespace orunet
