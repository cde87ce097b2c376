#pragma once

#include <cstdint>
#include <vector>

#include "htsc/time_series.hpp"

namespace htsc {

/// Tree of aggregation nodes indexed in level-order (root first, then each
/// level left to right). Bottom nodes are the leaves, all at the deepest
/// level; x = S * b maps bottom series to every node.
struct Hierarchy {
  int node_count = 0;        // n
  int bottom_count = 0;      // m
  int aggregated_count = 0;  // n - m
  int levels = 0;            // depth, root level is 1

  std::vector<int> level_of;                       // node -> level (1-based)
  std::vector<int> parent_of;                      // node -> parent, -1 for root
  std::vector<std::vector<int>> children_of;       // node -> children (ascending)
  std::vector<std::uint8_t> summation;             // S, n x m row-major binary
  std::vector<int> bottom_nodes;                   // node indices at the bottom level
  std::vector<int> bottom_position;                // node -> 0..m-1, -1 if aggregated
  std::vector<std::vector<int>> bottom_descendants;  // node -> bottom positions under it

  std::uint8_t s_at(int node, int bottom) const {
    return summation[static_cast<std::size_t>(node) * bottom_count + bottom];
  }
};

/// Build a hierarchy from per-node levels and parent indices (level-order).
/// Derives S, children and descendant sets. Throws DataError only when the
/// arrays cannot be interpreted at all (size mismatch, parent out of range);
/// semantic violations are left for validate_hierarchy to report.
Hierarchy make_hierarchy(const std::vector<int>& levels,
                         const std::vector<int>& parents);

/// Regular tree template: branching[l] children per node at level l+1.
/// branching = {4} gives one root with four leaves.
Hierarchy uniform_hierarchy(const std::vector<int>& branching);

/// Check all structural invariants; returns the first violation found.
/// Violations are data, not faults: never throws.
ValidationReport validate_hierarchy(const Hierarchy& h);

}  // namespace htsc
