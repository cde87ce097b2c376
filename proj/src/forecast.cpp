#include "htsc/forecast.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "htsc/errors.hpp"
#include "htsc/parallel.hpp"

namespace htsc {

namespace {

/// Solve the (small) normal equations A x = b in place by Gaussian
/// elimination with partial pivoting; returns false when near-singular.
bool solve_linear(std::vector<std::vector<double>>& a, std::vector<double>& b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    if (std::fabs(a[pivot][col]) < 1e-12) return false;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < n; ++r) {
      double f = a[r][col] / a[col][col];
      for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (int col = n - 1; col >= 0; --col) {
    for (int r = 0; r < col; ++r) b[r] -= a[r][col] * b[col];
    b[col] /= a[col][col];
  }
  return true;
}

}  // namespace

void Ar2Forecaster::fit(const TimeSeries& history) {
  const auto& x = history.values;
  if (x.empty()) throw DataError("Ar2Forecaster: empty history");
  const int T = static_cast<int>(x.size());
  fitted_length_ = x.size();
  last_ = x.back();
  naive_ = T < 4;
  coef_.assign(4, 0.0);  // intercept, drift per step, phi1, phi2
  tail_.assign(2, 0.0);
  if (naive_) return;

  // Linear drift by least squares, then AR(2) on the residuals.
  double st = 0, stt = 0, sx = 0, stx = 0;
  for (int t = 0; t < T; ++t) {
    st += t;
    stt += static_cast<double>(t) * t;
    sx += x[t];
    stx += t * x[t];
  }
  double det = T * stt - st * st;
  double slope = det != 0.0 ? (T * stx - st * sx) / det : 0.0;
  double intercept = (sx - slope * st) / T;
  coef_[0] = intercept;
  coef_[1] = slope;

  std::vector<double> r(T);
  for (int t = 0; t < T; ++t) r[t] = x[t] - (intercept + slope * t);

  if (T - 2 >= 3) {
    double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
    for (int t = 2; t < T; ++t) {
      a11 += r[t - 1] * r[t - 1];
      a12 += r[t - 1] * r[t - 2];
      a22 += r[t - 2] * r[t - 2];
      b1 += r[t - 1] * r[t];
      b2 += r[t - 2] * r[t];
    }
    double ridge = 1e-10 * (1.0 + 0.5 * (a11 + a22));
    a11 += ridge;
    a22 += ridge;
    double d = a11 * a22 - a12 * a12;
    if (std::fabs(d) > 1e-30) {
      double phi1 = (b1 * a22 - b2 * a12) / d;
      double phi2 = (a11 * b2 - a12 * b1) / d;
      // Project into the AR(2) stationarity triangle so recursion cannot blow up.
      for (int guard = 0; guard < 80; ++guard) {
        if (phi2 > -1.0 + 1e-6 && phi1 + phi2 < 1.0 - 1e-6 &&
            phi2 - phi1 < 1.0 - 1e-6)
          break;
        phi1 *= 0.95;
        phi2 *= 0.95;
      }
      coef_[2] = phi1;
      coef_[3] = phi2;
    }
  }
  tail_ = {r[T - 2], r[T - 1]};
}

TimeSeries Ar2Forecaster::predict(int horizon) {
  if (horizon < 0) throw DataError("Ar2Forecaster: negative horizon");
  TimeSeries out;
  out.values.reserve(horizon);
  if (naive_) {
    out.values.assign(horizon, last_);
    return out;
  }
  double r1 = tail_[1], r2 = tail_[0];
  const double T = static_cast<double>(fitted_length_);
  for (int h = 0; h < horizon; ++h) {
    double r = coef_[2] * r1 + coef_[3] * r2;
    double v = coef_[0] + coef_[1] * (T + h) + r;
    out.values.push_back(v);
    r2 = r1;
    r1 = r;
  }
  return out;
}

std::unique_ptr<Forecaster> Ar2Forecaster::clone() const {
  return std::make_unique<Ar2Forecaster>(*this);
}

std::vector<double> fuzzy_weights(const std::vector<double>& distances, double m) {
  if (distances.empty()) throw DataError("fuzzy_weights: no distances");
  if (!(m > 1.0)) throw DataError("fuzzy_weights: m must exceed 1");
  const std::size_t k = distances.size();
  std::vector<double> w(k, 0.0);

  std::size_t zeros = 0;
  for (double d : distances)
    if (!(d > 0.0)) ++zeros;
  if (zeros > 0) {
    // Limit of the membership formula: all mass on the zero-distance set.
    for (std::size_t j = 0; j < k; ++j)
      if (!(distances[j] > 0.0)) w[j] = 1.0 / static_cast<double>(zeros);
    return w;
  }

  // w_j = d_j^(-p) / sum_k d_k^(-p), evaluated as a softmax in log space.
  const double p = 2.0 / (m - 1.0);
  std::vector<double> logits(k);
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    logits[j] = -p * std::log(distances[j]);
    max_logit = std::max(max_logit, logits[j]);
  }
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    w[j] = std::exp(logits[j] - max_logit);
    total += w[j];
  }
  for (double& v : w) v /= total;
  return w;
}

TimeSeries combine_forecasts(const std::vector<double>& weights,
                             const std::vector<const TimeSeries*>& mean_forecasts,
                             int horizon) {
  if (weights.size() != mean_forecasts.size())
    throw DataError("combine_forecasts: weight/forecast count mismatch");
  for (const auto* f : mean_forecasts)
    if (static_cast<int>(f->length()) < horizon)
      throw DataError("combine_forecasts: forecast shorter than the horizon");
  TimeSeries out;
  out.values.assign(horizon, 0.0);
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] == 0.0) continue;
    if (weights[j] == 1.0) {
      out.values.assign(mean_forecasts[j]->values.begin(),
                        mean_forecasts[j]->values.begin() + horizon);
      return out;
    }
    for (int t = 0; t < horizon; ++t) out.values[t] += weights[j] * mean_forecasts[j]->values[t];
  }
  return out;
}

void coherent_projection(const Hierarchy& h, std::vector<TimeSeries>& forecasts) {
  if (static_cast<int>(forecasts.size()) != h.node_count)
    throw DataError("coherent_projection: one forecast per node required");
  for (int b : h.bottom_nodes)
    if (forecasts[b].values.empty())
      throw DataError("coherent_projection: missing bottom forecast");
  const std::size_t horizon = forecasts[h.bottom_nodes.front()].length();
  for (int i = 0; i < h.aggregated_count; ++i) {
    auto& dst = forecasts[i].values;
    dst.assign(horizon, 0.0);
    for (int b : h.bottom_descendants[i]) {
      const auto& src = forecasts[h.bottom_nodes[b]].values;
      for (std::size_t t = 0; t < horizon; ++t) dst[t] += src[t];
    }
  }
}

namespace {

std::vector<int> uniform_horizons(const HtsDataset& ds, int horizon) {
  return std::vector<int>(ds.instances.size(), horizon);
}

}  // namespace

ForecastResult forecast_with_clusters(const HtsDataset& ds,
                                      const MultiLevelClusterModel& model,
                                      const Forecaster& prototype,
                                      const std::vector<int>& horizons, double m) {
  if (horizons.size() != ds.instances.size())
    throw DataError("forecast_with_clusters: one horizon per instance required");
  const auto t0 = std::chrono::steady_clock::now();
  const int max_h = horizons.empty() ? 0 : *std::max_element(horizons.begin(), horizons.end());

  ForecastResult res;
  // One fit per cluster mean per level.
  std::map<int, std::vector<TimeSeries>> mean_forecasts;
  for (const auto& [level, lm] : model.per_level) {
    auto& fc = mean_forecasts[level];
    fc.resize(lm.raw_means.size());
    parallel_for(lm.raw_means.size(), [&, level = level, &lm = lm](std::size_t c) {
      auto f = prototype.clone();
      f->fit(lm.raw_means[c]);
      fc[c] = f->predict(max_h);
    });
    res.report.fits += static_cast<long long>(lm.raw_means.size());
  }

  res.forecasts.resize(ds.instances.size());
  for (std::size_t j = 0; j < ds.instances.size(); ++j)
    res.forecasts[j].resize(ds.instances[j].hierarchy.node_count);

  // Reconstruct each node from its level's mean forecasts.
  for (const auto& [level, lm] : model.per_level) {
    const auto& fc = mean_forecasts[level];
    std::vector<const TimeSeries*> fc_ptrs;
    for (const auto& f : fc) fc_ptrs.push_back(&f);
    const auto& cfg = model.config;
    parallel_for(lm.items.size(), [&, &lm = lm](std::size_t i) {
      auto [inst, node] = lm.items[i];
      const TimeSeries& history = ds.instances[inst].series[node];
      std::vector<double> dist(lm.raw_means.size());
      for (std::size_t c = 0; c < lm.raw_means.size(); ++c)
        dist[c] = std::max(0.0, sdtw_divergence(history, lm.raw_means[c], cfg.sdtw));
      auto weights = fuzzy_weights(dist, m);
      res.forecasts[inst][node] = combine_forecasts(weights, fc_ptrs, horizons[inst]);
    });
  }

  for (std::size_t j = 0; j < ds.instances.size(); ++j)
    coherent_projection(ds.instances[j].hierarchy, res.forecasts[j]);

  res.report.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
  return res;
}

ForecastResult forecast_with_clusters(const HtsDataset& ds,
                                      const MultiLevelClusterModel& model,
                                      const Forecaster& prototype, int horizon,
                                      double m) {
  return forecast_with_clusters(ds, model, prototype, uniform_horizons(ds, horizon), m);
}

ForecastResult forecast_per_series(const HtsDataset& ds, const Forecaster& prototype,
                                   const std::vector<int>& horizons) {
  if (horizons.size() != ds.instances.size())
    throw DataError("forecast_per_series: one horizon per instance required");
  const auto t0 = std::chrono::steady_clock::now();
  ForecastResult res;
  res.forecasts.resize(ds.instances.size());
  for (std::size_t j = 0; j < ds.instances.size(); ++j)
    res.forecasts[j].resize(ds.instances[j].hierarchy.node_count);

  std::vector<std::pair<int, int>> jobs;
  for (std::size_t j = 0; j < ds.instances.size(); ++j)
    for (int i = 0; i < ds.instances[j].hierarchy.node_count; ++i)
      jobs.emplace_back(static_cast<int>(j), i);
  parallel_for(jobs.size(), [&](std::size_t idx) {
    auto [j, i] = jobs[idx];
    auto f = prototype.clone();
    f->fit(ds.instances[j].series[i]);
    res.forecasts[j][i] = f->predict(horizons[j]);
  });
  res.report.fits = static_cast<long long>(jobs.size());

  for (std::size_t j = 0; j < ds.instances.size(); ++j)
    coherent_projection(ds.instances[j].hierarchy, res.forecasts[j]);

  res.report.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
  return res;
}

double mase(const std::vector<double>& actual, const std::vector<double>& forecast,
            const std::vector<double>& insample) {
  if (actual.size() != forecast.size() || actual.empty())
    throw DataError("mase: actual/forecast length mismatch");
  if (insample.size() < 2) throw DataError("mase: need at least 2 in-sample points");
  double denom = 0.0;
  for (std::size_t t = 1; t < insample.size(); ++t)
    denom += std::fabs(insample[t] - insample[t - 1]);
  denom /= static_cast<double>(insample.size() - 1);
  if (!(denom > 0.0)) throw DataError("MASE undefined: constant in-sample history");
  double num = 0.0;
  for (std::size_t t = 0; t < actual.size(); ++t)
    num += std::fabs(actual[t] - forecast[t]);
  num /= static_cast<double>(actual.size());
  return num / denom;
}

SplitSizes split_sizes(int n) {
  if (n < 3) throw DataError("split_sizes: series too short to split");
  SplitSizes s;
  s.test = std::max(1, static_cast<int>(std::llround(0.2 * n)));
  s.validation = static_cast<int>(std::llround(0.2 * n));
  s.train = n - s.test - s.validation;
  if (s.train < 1) {
    s.validation = std::max(0, n - s.test - 1);
    s.train = n - s.test - s.validation;
  }
  return s;
}

}  // namespace htsc
