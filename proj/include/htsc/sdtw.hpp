#pragma once

#include <optional>
#include <vector>

#include "htsc/matrix.hpp"
#include "htsc/time_series.hpp"

namespace htsc {

/// Smoothing temperature for the soft-min relaxation of DTW, plus an
/// optional Sakoe-Chiba band on |i - j| (widened automatically so at least
/// one alignment path stays feasible).
struct SdtwConfig {
  double gamma = 1.0;
  std::optional<int> band;
};

enum class CostKind { squared_euclidean };

/// Per-timestamp ground cost matrix. Default (and only) kind is squared
/// Euclidean on scalars: entries (i, j) = (x_i - y_j)^2.
struct CostMatrix {
  Matrix entries;
  CostKind kind = CostKind::squared_euclidean;
};

CostMatrix cost_matrix(const TimeSeries& x, const TimeSeries& y);

/// Soft-DTW value of a cost matrix: the soft-min over all monotone
/// alignments, computed by the Bellman recursion in O(T1*T2) with
/// max-shifted log-sum-exp reductions. May be negative; never NaN for
/// finite inputs. Lower-bounds hard DTW.
double soft_dtw(const CostMatrix& c, const SdtwConfig& cfg);

/// Fused variant that never materializes the cost matrix.
double soft_dtw(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg);

struct ValueGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/// Value and gradient of soft_dtw(cost_matrix(x, y)) w.r.t. x (the expected
/// alignment matrix chained through the squared-Euclidean cost).
ValueGrad soft_dtw_grad(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg);

/// Gradient w.r.t. the second argument y.
ValueGrad soft_dtw_grad_y(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg);

/// Gradient of soft_dtw(cost_matrix(x, x)) w.r.t. x, counting both argument
/// slots of the self cost.
ValueGrad soft_dtw_self_grad(const TimeSeries& x, const SdtwConfig& cfg);

/// Debiased soft-DTW: sdtw(x,y) - (sdtw(x,x) + sdtw(y,y)) / 2.
/// Exactly zero when x == y; empirically nonnegative.
double sdtw_divergence(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg);

/// Same combination when the three raw terms are already known; keeps the
/// exact-zero-at-equality arithmetic in one place.
double sdtw_divergence_from_terms(double sdtw_xy, double self_xx, double self_yy);

/// Divergence value plus gradient w.r.t. x.
ValueGrad sdtw_divergence_grad(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg);

/// Divergence gradient w.r.t. the second argument y.
ValueGrad sdtw_divergence_grad_y(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg);

}  // namespace htsc
