#include "htsc/sdtw_mean.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "htsc/parallel.hpp"

namespace htsc {

namespace {

struct Terms {
  double objective = 0.0;
  std::vector<double> grad;  // empty when not requested
};

/// Objective and (optionally) gradient of the weighted divergence mean.
/// The self term of mu is shared by every member, so it is evaluated once.
Terms evaluate(const std::vector<const TimeSeries*>& members,
               const std::vector<double>& weights,
               const std::vector<double>& member_self,  // SDTW(x_i, x_i)
               double weight_total, const TimeSeries& mu, const SdtwConfig& cfg,
               bool with_grad) {
  const std::size_t n = members.size();
  Terms out;
  if (with_grad) {
    ValueGrad mu_self = soft_dtw_self_grad(mu, cfg);
    std::vector<double> cross_vals(n);
    std::vector<std::vector<double>> cross_grads(n);
    parallel_for(n, [&](std::size_t i) {
      ValueGrad g = soft_dtw_grad_y(*members[i], mu, cfg);
      cross_vals[i] = g.value;
      cross_grads[i] = std::move(g.grad);
    });
    const double self_mu_value = mu_self.value;
    double obj = 0.0;
    out.grad.assign(mu.length(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      obj += weights[i] *
             sdtw_divergence_from_terms(cross_vals[i], member_self[i], self_mu_value);
      for (std::size_t t = 0; t < mu.length(); ++t)
        out.grad[t] += weights[i] * cross_grads[i][t];
    }
    out.objective = obj / weight_total;
    for (std::size_t t = 0; t < mu.length(); ++t)
      out.grad[t] = out.grad[t] / weight_total - 0.5 * mu_self.grad[t];
  } else {
    std::vector<double> cross_vals(n);
    parallel_for(n, [&](std::size_t i) {
      cross_vals[i] = soft_dtw(*members[i], mu, cfg);
    });
    double self_mu_value = soft_dtw(mu, mu, cfg);
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      obj += weights[i] *
             sdtw_divergence_from_terms(cross_vals[i], member_self[i], self_mu_value);
    out.objective = obj / weight_total;
  }
  return out;
}

}  // namespace

double mean_objective(const std::vector<const TimeSeries*>& members,
                      const std::vector<double>& weights, const TimeSeries& mu,
                      const SdtwConfig& cfg) {
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double obj = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i)
    obj += weights[i] * sdtw_divergence(*members[i], mu, cfg);
  return obj / total;
}

MeanResult sdtw_mean(const std::vector<const TimeSeries*>& members,
                     const std::vector<double>& weights, const TimeSeries& init,
                     const SdtwConfig& cfg, const MeanConfig& opt) {
  if (members.empty()) throw std::invalid_argument("sdtw_mean: no members");
  if (members.size() != weights.size())
    throw std::invalid_argument("sdtw_mean: weights size mismatch");
  const double weight_total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(weight_total > 0.0)) throw std::invalid_argument("sdtw_mean: zero total weight");

  std::vector<double> member_self(members.size());
  parallel_for(members.size(), [&](std::size_t i) {
    member_self[i] = soft_dtw(*members[i], *members[i], cfg);
  });

  MeanResult res;
  res.mean = init;
  double max_abs = 0.0;
  for (double v : init.values) max_abs = std::max(max_abs, std::fabs(v));
  double step = opt.step_scale * (1.0 + max_abs);

  Terms cur = evaluate(members, weights, member_self, weight_total, res.mean, cfg, true);
  res.trace.push_back(cur.objective);

  for (int it = 0; it < opt.max_iter; ++it) {
    double grad_sq = 0.0;
    for (double g : cur.grad) grad_sq += g * g;
    if (grad_sq <= 1e-28 * (1.0 + cur.objective * cur.objective)) break;

    TimeSeries candidate = res.mean;
    double accepted = -1.0;
    double s = step;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      for (std::size_t t = 0; t < res.mean.length(); ++t)
        candidate.values[t] = res.mean.values[t] - s * cur.grad[t];
      Terms trial =
          evaluate(members, weights, member_self, weight_total, candidate, cfg, false);
      if (trial.objective <= cur.objective - opt.armijo_c * s * grad_sq) {
        accepted = s;
        break;
      }
      s *= opt.shrink;
    }
    if (accepted < 0.0) {
      res.stalled = true;
      break;
    }

    res.mean.values = candidate.values;
    step = accepted * 2.0;  // warm-start the next line search
    double prev_obj = cur.objective;
    cur = evaluate(members, weights, member_self, weight_total, res.mean, cfg, true);
    res.trace.push_back(cur.objective);
    res.iterations = it + 1;
    if (std::fabs(prev_obj - cur.objective) <= opt.rel_tol * std::max(1.0, std::fabs(prev_obj)))
      break;
  }
  return res;
}

MeanResult sdtw_mean(const std::vector<const TimeSeries*>& members,
                     const TimeSeries& init, const SdtwConfig& cfg,
                     const MeanConfig& opt) {
  return sdtw_mean(members, std::vector<double>(members.size(), 1.0), init, cfg, opt);
}

std::size_t choose_mean_init(const std::vector<const TimeSeries*>& members,
                             const SdtwConfig& cfg, Rng& rng) {
  if (members.empty()) throw std::invalid_argument("choose_mean_init: no members");
  const std::size_t n = members.size();

  std::vector<std::size_t> lengths(n);
  for (std::size_t i = 0; i < n; ++i) lengths[i] = members[i]->length();
  std::vector<std::size_t> sorted = lengths;
  std::sort(sorted.begin(), sorted.end());
  double median = (n % 2 == 1)
                      ? static_cast<double>(sorted[n / 2])
                      : 0.5 * (static_cast<double>(sorted[n / 2 - 1]) +
                               static_cast<double>(sorted[n / 2]));
  // Nearest existing member length; ties resolve to the shorter one.
  std::size_t target = sorted[0];
  double best_gap = std::fabs(static_cast<double>(sorted[0]) - median);
  for (std::size_t len : sorted) {
    double gap = std::fabs(static_cast<double>(len) - median);
    if (gap < best_gap - 1e-12) {
      best_gap = gap;
      target = len;
    }
  }

  // Subsample up to 10 members (without replacement) as the reference set.
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<std::size_t> sample;
  const std::size_t want = std::min<std::size_t>(10, n);
  for (std::size_t k = 0; k < want; ++k) {
    std::size_t pick = k + rng.index(pool.size() - k);
    std::swap(pool[k], pool[pick]);
    sample.push_back(pool[k]);
  }

  std::size_t best = n;
  double best_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (lengths[i] != target) continue;
    double total = 0.0;
    for (std::size_t s : sample) total += sdtw_divergence(*members[i], *members[s], cfg);
    if (best == n || total < best_total) {
      best = i;
      best_total = total;
    }
  }
  return best;
}

}  // namespace htsc
