#pragma once

#include <vector>

#include "htsc/rng.hpp"
#include "htsc/sdtw.hpp"
#include "htsc/time_series.hpp"

namespace htsc {

/// Gradient descent with Armijo backtracking for divergence barycenters.
struct MeanConfig {
  int max_iter = 200;
  double rel_tol = 1e-6;        // stop on relative objective change below this
  double step_scale = 1e-2;     // initial step = step_scale * (1 + max|init|)
  double shrink = 0.5;
  int max_backtracks = 30;
  double armijo_c = 1e-4;
};

struct MeanResult {
  TimeSeries mean;
  std::vector<double> trace;  // accepted objective values, nonincreasing
  int iterations = 0;
  bool stalled = false;  // line search found no descent before convergence
};

/// Weighted mean objective: sum_i w_i * D(x_i, mu) / sum_i w_i.
double mean_objective(const std::vector<const TimeSeries*>& members,
                      const std::vector<double>& weights, const TimeSeries& mu,
                      const SdtwConfig& cfg);

/// Minimize the weighted divergence to the members, starting from init.
/// The result never has a larger objective than init; the trace records
/// each accepted iterate. Member lengths may differ; the mean keeps init's
/// length.
MeanResult sdtw_mean(const std::vector<const TimeSeries*>& members,
                     const std::vector<double>& weights, const TimeSeries& init,
                     const SdtwConfig& cfg, const MeanConfig& opt);

/// Uniform-weight convenience overload.
MeanResult sdtw_mean(const std::vector<const TimeSeries*>& members,
                     const TimeSeries& init, const SdtwConfig& cfg,
                     const MeanConfig& opt);

/// Seeding rule for a fresh mean: target length is the median member length
/// rounded to the nearest existing member length, and among members of that
/// length the one with the smallest total divergence to a random subsample
/// of up to 10 members wins. Returns the chosen member index.
std::size_t choose_mean_init(const std::vector<const TimeSeries*>& members,
                             const SdtwConfig& cfg, Rng& rng);

}  // namespace htsc
