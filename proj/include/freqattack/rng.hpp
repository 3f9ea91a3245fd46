#pragma once

#include <cstdint>
#include <random>

namespace freqattack {

// Deterministic random source built on std::mt19937_64, whose raw output
// sequence is fixed by the C++ standard. All derived draws (uniform reals,
// bounded integers, normals) are computed here rather than through the
// <random> distributions, whose algorithms are implementation-defined, so a
// seed reproduces the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound), unbiased via rejection. bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  // Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  // Independent child seed for stream `index`, mixed with SplitMix64.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace freqattack
