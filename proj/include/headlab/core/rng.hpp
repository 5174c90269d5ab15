#pragma once

#include <cmath>
#include <cstdint>

namespace headlab {

// Deterministic splitmix64-based generator. Self-contained so that streams are
// bit-identical across platforms and standard-library versions. Sub-streams are
// derived by hashing (seed, ids...) so any point in a run can recreate its
// generator from constants alone.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {}

  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

  static Rng from(uint64_t seed, uint64_t id0, uint64_t id1 = 0, uint64_t id2 = 0) {
    return Rng(mix(mix(mix(seed, id0), id1), id2));
  }

  uint64_t u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return n == 0 ? 0 : u64() % n; }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // Avoid log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

 private:
  uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace headlab
