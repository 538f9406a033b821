#pragma once

#include <cstdint>
#include <string_view>

namespace gaussenv {

// Splittable counter-style generator; integer arithmetic only, so streams are
// bit-reproducible across platforms.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // strictly inside (0,1) so inverse-CDF transforms stay finite
  double uniform01() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  int sign() { return (next() >> 63) ? 1 : -1; }
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Labeled sub-stream of a base seed ("dataset", "mc", ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  SplitMix64 g(base ^ fnv1a64(label));
  return g.next();
}

}  // namespace gaussenv
