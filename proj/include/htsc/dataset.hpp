#pragma once

#include <string>
#include <vector>

#include "htsc/hierarchy.hpp"
#include "htsc/time_series.hpp"

namespace htsc {

/// One hierarchical time series: a hierarchy plus one series per node, in
/// node (level-order) index order. All series in an instance share a length;
/// lengths may differ across instances.
struct HtsInstance {
  std::string id;
  Hierarchy hierarchy;
  std::vector<TimeSeries> series;
};

struct HtsDataset {
  std::vector<HtsInstance> instances;
  int levels = 0;  // shared depth across instances
};

/// Structural checks: hierarchy valid, one series per node, finite values,
/// equal lengths within the instance.
ValidationReport validate_instance(const HtsInstance& inst);

/// Opt-in coherence check: every aggregated series must equal the sum of its
/// bottom descendants (summed in ascending bottom order) within
/// tau = tau_scale * (1 + max |value|) per node.
ValidationReport check_coherence(const HtsInstance& inst, double tau_scale = 1e-6);

ValidationReport validate_dataset(const HtsDataset& ds);

struct LevelEntry {
  int instance = 0;
  int node = 0;
  const TimeSeries* series = nullptr;
};

/// All series at one level across the dataset: ordered by instance index,
/// then node index. Throws DataError when the level is out of range.
std::vector<LevelEntry> level_series(const HtsDataset& ds, int level);

}  // namespace htsc
