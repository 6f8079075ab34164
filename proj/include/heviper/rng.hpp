#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace heviper {

// std::uniform_real_distribution is implementation-defined, so floats are
// derived from the raw mt19937_64 stream (whose output is fixed by the
// standard). Every seeded table in the project is reproducible bit-for-bit
// on any conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi), rounded once to f32.
  float uniform(double lo, double hi) { return static_cast<float>(lo + (hi - lo) * unit()); }

  void fill_uniform(std::span<float> out, double lo, double hi) {
    for (float& v : out) v = uniform(lo, hi);
  }

  /// Uniform integer in [0, n) (n > 0) by rejection, platform independent.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace heviper
