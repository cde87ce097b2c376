#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "htsc/barycenter.hpp"
#include "htsc/dataset.hpp"
#include "htsc/measure.hpp"
#include "htsc/ot.hpp"
#include "htsc/rng.hpp"
#include "htsc/sdtw_mean.hpp"

namespace htsc {

enum class ClusterMode { multilevel, two_level_alt, levelwise };

std::string to_string(ClusterMode mode);
ClusterMode cluster_mode_from_string(const std::string& s);

struct ClusterConfig {
  std::map<int, int> k_per_level;
  SdtwConfig sdtw;
  OtConfig ot;
  MeanConfig mean;
  BarycenterConfig barycenter;
  int max_outer_iter = 100;
  std::uint64_t seed = 0;
  double fuzziness = 2.0;    // forwarded to forecasting
  double merge_eps = -1.0;   // < 0 selects 0.01 * median pairwise centroid distance
  int remove_eps = 1;        // drop clusters with size <= remove_eps
  bool postprocess = true;
  double boundary_ratio = 0.9;  // two-level calibration threshold
};

/// Discrete measure with its support series materialized, so models stay
/// self-contained after the run's atom registry is gone.
struct MaterializedMeasure {
  std::vector<TimeSeries> atoms;
  std::vector<double> weights;
};

/// Clustering state for one aggregation level: assignments over the level's
/// items (in level_series order), centroids, and the objective trace of the
/// main alternation (nonincreasing). Merge/remove post-processing logs its
/// own fine-tune trace separately, since changing the cluster count resets
/// the objective baseline.
struct LevelClusterModel {
  int level = 0;
  int k = 0;
  std::vector<std::pair<int, int>> items;  // (instance, node)
  std::vector<int> assignment;             // item -> cluster, 0..k-1
  std::vector<TimeSeries> raw_means;       // per cluster
  std::vector<MaterializedMeasure> barycenters;  // aggregated levels only
  std::vector<double> loss_trace;
  std::vector<double> post_trace;  // after merge/remove, monotone within itself
  std::vector<std::string> events;

  double final_loss() const {
    return post_trace.empty() ? loss_trace.back() : post_trace.back();
  }
};

struct MultiLevelClusterModel {
  ClusterMode mode = ClusterMode::multilevel;
  int levels = 0;
  std::map<int, LevelClusterModel> per_level;
  ClusterConfig config;
};

struct ClusterRunResult {
  MultiLevelClusterModel model;
  std::map<int, long long> level_wall_ms;
};

/// Lloyd-style K-means over raw series under the soft-DTW divergence:
/// alternate divergence-mean centering with nearest-divergence assignment
/// until assignments are stable. Centroid updates that would increase a
/// cluster's objective are rejected, so the loss trace is nonincreasing.
/// Empty clusters are reseeded to the member farthest from its centroid.
LevelClusterModel cluster_bottom_level(const std::vector<const TimeSeries*>& series,
                                       int k, const ClusterConfig& cfg, Rng& rng);

/// Empirical measure over the lower level's cluster means for every node at
/// `level`: atom weights are the fractions of the node's children assigned
/// to each lower cluster. The lower model must cover every child.
std::vector<DiscreteMeasure> lift_to_measures(const HtsDataset& ds, int level,
                                              const LevelClusterModel& lower,
                                              AtomRegistry& reg);

/// K-means in measure space: free-support barycenter centering and
/// nearest-w_sdtw assignment.
LevelClusterModel cluster_aggregated_level(const std::vector<DiscreteMeasure>& measures,
                                           int k, int support_size,
                                           const ClusterConfig& cfg, AtomRegistry& reg,
                                           Rng& rng);

/// Divergence means of the original series at `level`, one per cluster of
/// `model`; used as the atoms for the next level up and for forecasting.
std::vector<TimeSeries> refine_level_means(const HtsDataset& ds, int level,
                                           const LevelClusterModel& model,
                                           const ClusterConfig& cfg, Rng& rng);

/// Merge clusters whose centroids are closer than merge_eps (transitive
/// closure, merged clusters re-centered), drop clusters with at most
/// remove_eps members (members move to the nearest survivor), then run one
/// fine-tuning centering + assignment pass. Applies in series space.
void merge_remove_postprocess(LevelClusterModel& model,
                              const std::vector<const TimeSeries*>& series,
                              double merge_eps, int remove_eps,
                              const ClusterConfig& cfg);

/// Measure-space variant (aggregated levels): distances are w_sdtw.
void merge_remove_postprocess(LevelClusterModel& model,
                              const std::vector<DiscreteMeasure>& measures,
                              int support_size, double merge_eps, int remove_eps,
                              const ClusterConfig& cfg, AtomRegistry& reg, Rng& rng);

/// Bottom-up multilevel pipeline: series K-means at the bottom level, then
/// per level upward: lift to measures, measure K-means, refine raw means.
/// Post-processing runs per level when cfg.postprocess is set.
ClusterRunResult cluster_hts(const HtsDataset& ds, const ClusterConfig& cfg);

/// Two-level joint refinement: per outer iteration one bottom centering +
/// assignment step, a measure rebuild from the current bottom state, one top
/// centering + assignment step, and the boundary calibration rule (applied
/// only when it does not increase the bottom loss). Stops when both levels'
/// assignments are stable.
ClusterRunResult two_level_alternating(const HtsDataset& ds, int k_top, int k_bottom,
                                       const ClusterConfig& cfg);

/// Baseline: cluster every level independently on its raw series, without
/// measure lifting.
ClusterRunResult cluster_levelwise(const HtsDataset& ds, const ClusterConfig& cfg);

struct ObjectiveBreakdown {
  std::map<int, double> per_level;
  double total = 0.0;
};

/// Recompute every level's loss from scratch (no trace reuse): divergence
/// loss against raw means at the bottom (and for levelwise models), and
/// transport loss of the lifted measures against the stored barycenters at
/// aggregated levels.
ObjectiveBreakdown objective_value(const HtsDataset& ds,
                                   const MultiLevelClusterModel& model);

}  // namespace htsc
