#pragma once

#include <vector>

#include "htsc/matrix.hpp"
#include "htsc/measure.hpp"

namespace htsc {

/// epsilon = 0 selects the exact network-flow solver (atom counts up to
/// exact_size_limit per side); epsilon > 0 selects log-domain Sinkhorn with
/// the given marginal tolerance. cost_power raises the divergence ground
/// cost to that power (1 by default).
struct OtConfig {
  double epsilon = 0.0;
  int max_iter = 10000;
  double tol = 1e-9;
  int exact_size_limit = 64;
  int cost_power = 1;
};

/// Coupling matrix realizing a transport cost. For the exact solver the
/// duals certify optimality: cost - (sum a_i u_i + sum b_j v_j) <= 1e-8.
struct TransportPlan {
  Matrix plan;
  double cost = 0.0;
  std::vector<double> dual_u;
  std::vector<double> dual_v;
  int iterations = 0;
  double marginal_violation = 0.0;
};

/// Pairwise divergence matrix between the atoms of two measures, memoized
/// through the registry, raised to cost_power.
Matrix ground_cost_matrix(const DiscreteMeasure& P, const DiscreteMeasure& Q,
                          const AtomRegistry& reg, const SdtwConfig& cfg,
                          int cost_power = 1);

/// Optimal transport between weight vectors under the given cost matrix.
/// Zero-weight rows/columns are dropped internally; the returned plan keeps
/// the full shape with zero entries for them.
TransportPlan ot_cost(const std::vector<double>& p, const std::vector<double>& q,
                      const Matrix& cost, const OtConfig& cfg);

TransportPlan ot_cost(const DiscreteMeasure& P, const DiscreteMeasure& Q,
                      const Matrix& ground_cost, const OtConfig& cfg);

/// Wasserstein cost between discrete measures with the soft-DTW divergence
/// as ground cost.
double w_sdtw(const DiscreteMeasure& P, const DiscreteMeasure& Q,
              const AtomRegistry& reg, const SdtwConfig& sdtw_cfg,
              const OtConfig& ot_cfg);

/// Second-order variant: transport between measures whose supports are
/// themselves discrete measures, with w_sdtw as the ground cost.
double w_sdtw_level2(const std::vector<DiscreteMeasure>& support_p,
                     const std::vector<double>& weights_p,
                     const std::vector<DiscreteMeasure>& support_q,
                     const std::vector<double>& weights_q,
                     const AtomRegistry& reg, const SdtwConfig& sdtw_cfg,
                     const OtConfig& ot_cfg);

}  // namespace htsc
