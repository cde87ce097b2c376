#pragma once

#include <vector>

#include "htsc/ot.hpp"
#include "htsc/rng.hpp"
#include "htsc/sdtw_mean.hpp"

namespace htsc {

struct BarycenterConfig {
  int max_outer = 20;
  double rel_tol = 1e-5;
};

struct BarycenterResult {
  DiscreteMeasure measure;
  std::vector<double> objective_trace;  // nonincreasing across outer iterations
  bool clamped = false;                 // support_size exceeded the distinct atoms
};

/// Free-support Wasserstein barycenter under the soft-DTW divergence ground
/// cost: alternate transport plans from each input to the current barycenter
/// with support re-estimation, where each barycenter atom becomes the
/// divergence mean of input atoms weighted by incoming transport mass.
/// Weights stay uniform over the support; when all inputs are one identical
/// measure the input itself is returned (exact optimum, objective 0).
/// Updates that would increase the objective are rejected, so the trace is
/// nonincreasing.
BarycenterResult free_support_barycenter(
    const std::vector<DiscreteMeasure>& measures, const std::vector<double>& lambda,
    int support_size, AtomRegistry& reg, const SdtwConfig& sdtw_cfg,
    const OtConfig& ot_cfg, const MeanConfig& mean_cfg, const BarycenterConfig& cfg,
    Rng& rng, const DiscreteMeasure* init = nullptr);

}  // namespace htsc
