#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace s2d {

// SplitMix64. All randomness in the project flows through this generator so
// that runs are reproducible from a single master seed, independent of the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller (always consumes two draws).
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives an independent child seed from a master seed and a label, so the
// env, weight init, exploration and sampling streams never overlap.
inline uint64_t derive_seed(uint64_t master, std::string_view label) {
  Rng r(master ^ fnv1a64(label));
  return r.next_u64();
}

inline uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index) {
  Rng r(master ^ fnv1a64(label) ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  return r.next_u64();
}

}  // namespace s2d
