#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "otmm/array.hpp"

namespace otmm {

// splitmix64 mixing step; used to derive independent stream seeds.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for a named sub-stream of a master seed. Distinct (master, stream)
/// pairs give statistically independent generators.
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
  return mix64(mix64(master) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// Deterministic RNG. All randomness in the library flows through explicit
/// Rng instances so runs are reproducible from their seeds.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<uint64_t>(n)); }

  /// Standard normal via Box-Muller (explicit cache, deterministic order).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Rademacher sign, +1 or -1 with equal probability.
  double sign() { return (gen_() & 1ULL) ? 1.0 : -1.0; }

  Array normal_array(int rows, int cols, double scale = 1.0) {
    Array a(rows, cols);
    for (auto& x : a) x = scale * normal();
    return a;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace otmm
