#include "htsc/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "htsc/errors.hpp"

namespace htsc {

ValidationReport validate_series(const TimeSeries& ts) {
  if (ts.values.empty()) return ValidationReport::bad("series '" + ts.id + "' is empty");
  for (double v : ts.values) {
    if (!std::isfinite(v))
      return ValidationReport::bad("series '" + ts.id + "' contains a non-finite value");
  }
  return ValidationReport::good();
}

Hierarchy make_hierarchy(const std::vector<int>& levels,
                         const std::vector<int>& parents) {
  const int n = static_cast<int>(levels.size());
  if (static_cast<int>(parents.size()) != n)
    throw DataError("make_hierarchy: levels and parents size mismatch");
  if (n == 0) throw DataError("make_hierarchy: empty node list");

  Hierarchy h;
  h.node_count = n;
  h.level_of = levels;
  h.parent_of = parents;
  h.levels = *std::max_element(levels.begin(), levels.end());
  h.children_of.assign(n, {});
  for (int i = 0; i < n; ++i) {
    int p = parents[i];
    if (p >= n || p < -1) throw DataError("make_hierarchy: parent index out of range");
    if (p >= 0) {
      if (p >= i) throw DataError("make_hierarchy: parent must precede child");
      h.children_of[p].push_back(i);
    }
  }

  h.bottom_position.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    if (levels[i] == h.levels) {
      h.bottom_position[i] = static_cast<int>(h.bottom_nodes.size());
      h.bottom_nodes.push_back(i);
    }
  }
  h.bottom_count = static_cast<int>(h.bottom_nodes.size());
  h.aggregated_count = n - h.bottom_count;

  // Bottom descendants, children-first so every child is ready when used.
  h.bottom_descendants.assign(n, {});
  for (int i = n - 1; i >= 0; --i) {
    if (h.bottom_position[i] >= 0) {
      h.bottom_descendants[i] = {h.bottom_position[i]};
    } else {
      for (int c : h.children_of[i]) {
        auto& dst = h.bottom_descendants[i];
        dst.insert(dst.end(), h.bottom_descendants[c].begin(),
                   h.bottom_descendants[c].end());
      }
      std::sort(h.bottom_descendants[i].begin(), h.bottom_descendants[i].end());
    }
  }

  h.summation.assign(static_cast<std::size_t>(n) * h.bottom_count, 0);
  for (int i = 0; i < n; ++i)
    for (int b : h.bottom_descendants[i])
      h.summation[static_cast<std::size_t>(i) * h.bottom_count + b] = 1;
  return h;
}

Hierarchy uniform_hierarchy(const std::vector<int>& branching) {
  std::vector<int> levels{1};
  std::vector<int> parents{-1};
  std::vector<int> previous{0};  // node indices of the level just built
  for (std::size_t l = 0; l < branching.size(); ++l) {
    if (branching[l] < 1) throw DataError("uniform_hierarchy: branching must be >= 1");
    std::vector<int> current;
    for (int p : previous) {
      for (int c = 0; c < branching[l]; ++c) {
        current.push_back(static_cast<int>(levels.size()));
        levels.push_back(static_cast<int>(l) + 2);
        parents.push_back(p);
      }
    }
    previous = std::move(current);
  }
  return make_hierarchy(levels, parents);
}

ValidationReport validate_hierarchy(const Hierarchy& h) {
  const int n = h.node_count;
  if (n < 1) return ValidationReport::bad("node count must be >= 1");
  if (static_cast<int>(h.level_of.size()) != n ||
      static_cast<int>(h.parent_of.size()) != n ||
      static_cast<int>(h.children_of.size()) != n)
    return ValidationReport::bad("node array size mismatch");
  if (h.node_count != h.aggregated_count + h.bottom_count)
    return ValidationReport::bad("node count != aggregated + bottom count");

  // Root: exactly one parentless node, first in level order, at level 1.
  for (int i = 0; i < n; ++i) {
    if (h.parent_of[i] == -1 && i != 0)
      return ValidationReport::bad("multiple roots or root not first");
  }
  if (h.parent_of[0] != -1 || h.level_of[0] != 1)
    return ValidationReport::bad("root must be node 0 at level 1");

  // Level-order indexing: levels nondecreasing, parents ordered within a level.
  for (int i = 1; i < n; ++i) {
    if (h.level_of[i] < h.level_of[i - 1])
      return ValidationReport::bad("node indices not in level order");
    if (h.level_of[i] == h.level_of[i - 1] && h.parent_of[i] < h.parent_of[i - 1])
      return ValidationReport::bad("nodes within a level not left-to-right");
  }

  for (int i = 1; i < n; ++i) {
    int p = h.parent_of[i];
    if (p < 0 || p >= n) return ValidationReport::bad("parent index out of range");
    if (p >= i) return ValidationReport::bad("parent does not precede child");
    if (h.level_of[p] != h.level_of[i] - 1)
      return ValidationReport::bad("parent not exactly one level above child");
  }

  // Leaves live exactly at the bottom level; a leaf higher up is a ragged
  // tree, which is rejected rather than silently supported.
  for (int i = 0; i < n; ++i) {
    bool leaf = h.children_of[i].empty();
    bool bottom = h.level_of[i] == h.levels;
    if (leaf != bottom)
      return ValidationReport::bad(leaf ? "ragged tree: leaf above the bottom level"
                                        : "bottom-level node has children");
  }

  const int m = h.bottom_count;
  if (m < 1) return ValidationReport::bad("no bottom nodes");
  if (static_cast<int>(h.summation.size()) != n * m)
    return ValidationReport::bad("summation matrix shape mismatch");

  // Bottom rows of S form the identity.
  for (int r = 0; r < m; ++r) {
    int node = n - m + r;
    for (int c = 0; c < m; ++c) {
      if (h.s_at(node, c) != (r == c ? 1 : 0))
        return ValidationReport::bad("bottom rows of S are not the identity");
    }
  }

  // Each aggregated row equals the sum of its children's rows.
  for (int i = 0; i < n - m; ++i) {
    for (int c = 0; c < m; ++c) {
      int sum = 0;
      for (int child : h.children_of[i]) sum += h.s_at(child, c);
      if (sum != h.s_at(i, c))
        return ValidationReport::bad("aggregation consistency: row " +
                                     std::to_string(i) +
                                     " is not the sum of its children");
    }
  }
  return ValidationReport::good();
}

}  // namespace htsc
