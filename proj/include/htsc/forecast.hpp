#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "htsc/cluster.hpp"
#include "htsc/dataset.hpp"

namespace htsc {

/// Point forecaster interface. Implementations must be deterministic under
/// their seed; predict(h) returns exactly h values.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual void fit(const TimeSeries& history) = 0;
  virtual TimeSeries predict(int horizon) = 0;
  virtual std::unique_ptr<Forecaster> clone() const = 0;
};

/// Built-in baseline: least-squares linear drift plus an AR(2) fit on the
/// detrended residuals, forecasting by 1-step recursion. The AR
/// coefficients are projected into the stationarity triangle so long
/// recursions cannot diverge; histories shorter than 4 fall back to a
/// last-value forecast. Deterministic.
class Ar2Forecaster : public Forecaster {
 public:
  void fit(const TimeSeries& history) override;
  TimeSeries predict(int horizon) override;
  std::unique_ptr<Forecaster> clone() const override;

 private:
  std::vector<double> coef_;  // intercept, drift per step, phi1, phi2
  bool naive_ = false;
  double last_ = 0.0;
  std::vector<double> tail_;  // last two residuals
  std::size_t fitted_length_ = 0;
};

/// Soft memberships from divergences to the cluster means:
/// w_j proportional to d_j^(-2/(m-1)), normalized on the simplex. Zero
/// distances take the limit: uniform over the zero set, zero elsewhere.
std::vector<double> fuzzy_weights(const std::vector<double>& distances, double m);

/// Elementwise convex combination of mean forecasts. Zero weights are
/// skipped so a weight-one forecast passes through bitwise.
TimeSeries combine_forecasts(const std::vector<double>& weights,
                             const std::vector<const TimeSeries*>& mean_forecasts,
                             int horizon);

/// Bottom-up coherence projection: every aggregated forecast is replaced by
/// the sum of its bottom descendants' forecasts, summed in ascending bottom
/// order (fixed order makes the constraint bit-exactly checkable). Bottom
/// forecasts pass through unchanged.
void coherent_projection(const Hierarchy& hierarchy, std::vector<TimeSeries>& forecasts);

struct ForecastReport {
  long long fits = 0;
  long long wall_ms = 0;
  std::map<int, double> mase_per_level;  // filled by evaluation harnesses
};

struct ForecastResult {
  /// forecasts[instance][node], horizon values each.
  std::vector<std::vector<TimeSeries>> forecasts;
  ForecastReport report;
};

/// Cluster-accelerated forecasting: fit the forecaster once per cluster mean
/// per level, rebuild every node's forecast as the fuzzy combination of its
/// level's mean forecasts, then project each instance onto the coherent
/// subspace. horizons holds one horizon per instance.
ForecastResult forecast_with_clusters(const HtsDataset& ds,
                                      const MultiLevelClusterModel& model,
                                      const Forecaster& prototype,
                                      const std::vector<int>& horizons, double m);

ForecastResult forecast_with_clusters(const HtsDataset& ds,
                                      const MultiLevelClusterModel& model,
                                      const Forecaster& prototype, int horizon,
                                      double m);

/// Per-series baseline: one forecaster fit per node, then the same
/// projection.
ForecastResult forecast_per_series(const HtsDataset& ds, const Forecaster& prototype,
                                   const std::vector<int>& horizons);

/// Mean absolute scaled error: mean |actual - forecast| over the horizon
/// divided by the in-sample one-step naive mean absolute difference.
/// Throws DataError when the denominator is zero (constant history).
double mase(const std::vector<double>& actual, const std::vector<double>& forecast,
            const std::vector<double>& insample);

/// 0.6 / 0.2 / 0.2 train/validation/test split sizes for a series of
/// length n (test gets at least one point).
struct SplitSizes {
  int train = 0;
  int validation = 0;
  int test = 0;
};
SplitSizes split_sizes(int n);

}  // namespace htsc
