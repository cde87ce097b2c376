#pragma once

#include <vector>

#include "htsc/matrix.hpp"

namespace htsc::metrics {

/// Cluster labels per item (items are the vector indices). Labels need not
/// be contiguous or start at zero.
struct Partition {
  std::vector<int> labels;

  std::size_t item_count() const { return labels.size(); }
};

struct Contingency {
  std::vector<std::vector<long long>> counts;  // clusters of a x clusters of b
  std::vector<long long> row_totals;
  std::vector<long long> col_totals;
  long long n = 0;
};

/// Joint label counts; throws DataError when the item sets differ in size.
Contingency contingency(const Partition& a, const Partition& b);

/// Normalized mutual information with geometric-mean normalization and
/// natural-log entropies. Conventions: both partitions trivial -> 1,
/// exactly one trivial -> 0.
double nmi(const Partition& a, const Partition& b);

/// Adjusted mutual information with the max(H_a, H_b) normalizer and the
/// exact hypergeometric expected MI.
double ami(const Partition& a, const Partition& b);

/// Adjusted Rand index.
double ari(const Partition& a, const Partition& b);

}  // namespace htsc::metrics
