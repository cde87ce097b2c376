#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace htsc {

/// One step of the splitmix64 sequence; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

/// Derive an independent child seed from a base seed, a stream name and an
/// index. Used so that every stage (simulation, seeding, refinement, ...)
/// draws from its own substream and stays reproducible in isolation.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                          std::uint64_t index = 0);

/// Seeded RNG with explicitly-spelled samplers. mt19937_64 output is fixed
/// by the standard, and the samplers avoid std::*_distribution, whose
/// results differ across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  /// Gaussian via Box-Muller (two uniform draws per call).
  double normal(double mean = 0.0, double stddev = 1.0);

  /// Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  /// Integer uniform in [lo, hi] inclusive.
  long long integer(long long lo, long long hi);

  /// Sample an index with probability proportional to weights[i].
  /// Weights must be nonnegative with a positive sum.
  std::size_t sample_weighted(const std::vector<double>& weights);

 private:
  std::mt19937_64 engine_;
};

}  // namespace htsc
