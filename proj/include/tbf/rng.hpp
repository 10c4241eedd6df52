#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace tbf {

// Sequential generator for training loops, masks and test data. MT19937-64
// is fully specified by the C++ standard, and the distribution helpers below
// use fixed algorithms, so a seed gives the same stream on every platform.
using Rng = std::mt19937_64;

// Uniform in [lo, hi).
double uniform_real(Rng& rng, double lo, double hi);

// Uniform integer in [0, n). n must be > 0.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

double standard_normal(Rng& rng);

/// Counter-based SplitMix64 stream: the i-th output depends only on
/// (key, i), so independent streams can be created per voxel and consumed
/// in parallel without changing results.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tbf
