#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "htsc/dataset.hpp"

namespace htsc {

/// ARMA(2,2) benchmark configuration. offsets holds one mean-shift per true
/// cluster; the hierarchy template applies to every instance.
struct SynthConfig {
  std::vector<double> offsets = {0.0, 8.0, 16.0, 24.0};
  int instances_per_cluster = 30;
  int length_min = 80;
  int length_max = 300;
  std::vector<int> branching = {3, 3, 2};  // children per level; levels = size + 1
  double noise_std = 1.0;
  std::uint64_t seed = 0;
  int burn_in = 50;
};

/// Simulate x_t = 0.75 x_{t-1} - 0.25 x_{t-2} + 0.65 e_{t-1} + 0.35 e_{t-2}
/// + e_t + offset with zero initial conditions and Gaussian noise, dropping
/// burn_in steps before recording. Deterministic under the seed.
TimeSeries simulate_arma(int length, double offset, double noise_std,
                         std::uint64_t seed, int burn_in = 50);

struct Benchmark {
  HtsDataset dataset;
  /// True labels per level, aligned with level_series order.
  std::map<int, std::vector<int>> labels;
};

/// Bottom series simulated per cluster offset; aggregates are exact sums
/// through the hierarchy, so the dataset is coherent by construction. An
/// instance's label propagates to all its nodes. Per-instance lengths are
/// drawn uniformly from [length_min, length_max].
Benchmark generate_benchmark(const SynthConfig& cfg);

}  // namespace htsc
