#pragma once

#include <string>

#include "htsc/cluster.hpp"

namespace htsc {

/// Self-contained JSON form of a fitted model: per-level assignments,
/// centroid series, barycenter atoms/weights, loss traces, and the full
/// config + seed, enough to reproduce or consume the run. Doubles use
/// shortest round-trip encoding, so save/load is bit-exact.
std::string model_to_json(const MultiLevelClusterModel& model);
MultiLevelClusterModel model_from_json(const std::string& text);

}  // namespace htsc
