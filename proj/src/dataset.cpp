#include "htsc/dataset.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "htsc/errors.hpp"

namespace htsc {

ValidationReport validate_instance(const HtsInstance& inst) {
  auto hr = validate_hierarchy(inst.hierarchy);
  if (!hr) return hr;
  if (static_cast<int>(inst.series.size()) != inst.hierarchy.node_count)
    return ValidationReport::bad("instance '" + inst.id + "': series count != node count");
  std::size_t len = inst.series.front().length();
  for (const auto& ts : inst.series) {
    auto sr = validate_series(ts);
    if (!sr) return sr;
    if (ts.length() != len)
      return ValidationReport::bad("instance '" + inst.id +
                                   "': series lengths differ within the instance");
  }
  return ValidationReport::good();
}

ValidationReport check_coherence(const HtsInstance& inst, double tau_scale) {
  const Hierarchy& h = inst.hierarchy;
  const std::size_t len = inst.series.front().length();
  for (int i = 0; i < h.aggregated_count; ++i) {
    const auto& agg = inst.series[i].values;
    double max_abs = 0.0;
    for (double v : agg) max_abs = std::max(max_abs, std::fabs(v));
    const double tau = tau_scale * (1.0 + max_abs);
    for (std::size_t t = 0; t < len; ++t) {
      double sum = 0.0;
      for (int b : h.bottom_descendants[i])
        sum += inst.series[h.bottom_nodes[b]].values[t];
      if (std::fabs(agg[t] - sum) > tau)
        return ValidationReport::bad("instance '" + inst.id + "': node " +
                                     std::to_string(i) +
                                     " is not the sum of its bottom descendants");
    }
  }
  return ValidationReport::good();
}

ValidationReport validate_dataset(const HtsDataset& ds) {
  if (ds.instances.empty()) return ValidationReport::bad("dataset has no instances");
  if (ds.levels < 1) return ValidationReport::bad("dataset levels must be >= 1");
  for (const auto& inst : ds.instances) {
    auto r = validate_instance(inst);
    if (!r) return r;
    if (inst.hierarchy.levels != ds.levels)
      return ValidationReport::bad("instance '" + inst.id +
                                   "' depth differs from the dataset level count");
  }
  return ValidationReport::good();
}

std::vector<LevelEntry> level_series(const HtsDataset& ds, int level) {
  if (level < 1 || level > ds.levels)
    throw DataError("level_series: level " + std::to_string(level) +
                    " out of range 1.." + std::to_string(ds.levels));
  std::vector<LevelEntry> out;
  for (int j = 0; j < static_cast<int>(ds.instances.size()); ++j) {
    const auto& inst = ds.instances[j];
    for (int i = 0; i < inst.hierarchy.node_count; ++i) {
      if (inst.hierarchy.level_of[i] == level)
        out.push_back({j, i, &inst.series[i]});
    }
  }
  return out;
}

}  // namespace htsc
