#include "htsc/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "htsc/errors.hpp"
#include "htsc/parallel.hpp"

namespace htsc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Exact transportation LP via successive shortest augmenting paths with
/// Johnson potentials on the bipartite flow network. Supplies and demands
/// are real masses; every augmentation zeroes a surplus, a deficit, or a
/// backward arc, so the loop terminates. Costs are shifted to be
/// nonnegative first (a uniform shift moves the optimum by shift * mass).
TransportPlan solve_exact(const std::vector<double>& a, const std::vector<double>& b,
                          const Matrix& cost) {
  const int k1 = static_cast<int>(a.size());
  const int k2 = static_cast<int>(b.size());
  const int V = k1 + k2;

  double shift = 0.0;
  for (double c : cost.data) shift = std::min(shift, c);

  Matrix flow(k1, k2, 0.0);
  std::vector<double> surplus = a;
  std::vector<double> deficit = b;
  std::vector<double> pot(V, 0.0);

  std::vector<double> dist(V);
  std::vector<int> parent(V);  // predecessor node on the shortest path
  std::vector<char> visited(V);

  // Reduced costs are nonnegative by the potential invariant; clamp the
  // floating-point dust so Dijkstra stays sound.
  auto reduced_forward = [&](int i, int j) {
    return std::max(0.0, (cost(i, j) - shift) + pot[i] - pot[k1 + j]);
  };
  auto reduced_backward = [&](int i, int j) {
    return std::max(0.0, -(cost(i, j) - shift) + pot[k1 + j] - pot[i]);
  };

  const double mass_eps = 1e-15;
  double remaining = std::accumulate(surplus.begin(), surplus.end(), 0.0);
  const int max_augment = 50 * (V + 4) + 1000;
  int augment = 0;

  while (remaining > mass_eps) {
    if (++augment > max_augment)
      throw SolverError("exact transport: augmentation limit reached", remaining);

    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(visited.begin(), visited.end(), 0);
    for (int i = 0; i < k1; ++i)
      if (surplus[i] > mass_eps) dist[i] = 0.0;

    // O(V^2) Dijkstra; sizes are capped at exact_size_limit per side.
    for (int round = 0; round < V; ++round) {
      int u = -1;
      for (int v = 0; v < V; ++v)
        if (!visited[v] && dist[v] < kInf && (u < 0 || dist[v] < dist[u])) u = v;
      if (u < 0) break;
      visited[u] = 1;
      if (u < k1) {
        for (int j = 0; j < k2; ++j) {
          double nd = dist[u] + reduced_forward(u, j);
          if (nd < dist[k1 + j] - 1e-18) {
            dist[k1 + j] = nd;
            parent[k1 + j] = u;
          }
        }
      } else {
        int j = u - k1;
        for (int i = 0; i < k1; ++i) {
          if (flow(i, j) <= 0.0) continue;
          double nd = dist[u] + reduced_backward(i, j);
          if (nd < dist[i] - 1e-18) {
            dist[i] = nd;
            parent[i] = u;
          }
        }
      }
    }

    int target = -1;
    for (int j = 0; j < k2; ++j) {
      if (deficit[j] > mass_eps && dist[k1 + j] < kInf &&
          (target < 0 || dist[k1 + j] < dist[k1 + target]))
        target = j;
    }
    if (target < 0)
      throw SolverError("exact transport: no augmenting path", remaining);
    const double dt = dist[k1 + target];
    for (int v = 0; v < V; ++v) pot[v] += std::min(dist[v], dt);

    // Walk back to the source supplier, collecting the bottleneck.
    // Forward arcs (supplier -> consumer) are uncapacitated; backward arcs
    // (consumer -> supplier) ride existing flow.
    int node = k1 + target;
    double amount = deficit[target];
    while (parent[node] != -1) {
      int prev = parent[node];
      if (node < k1) amount = std::min(amount, flow(node, prev - k1));
      node = prev;
    }
    amount = std::min(amount, surplus[node]);

    int cur = k1 + target;
    while (parent[cur] != -1) {
      int prev = parent[cur];
      if (cur >= k1)
        flow(prev, cur - k1) += amount;  // supplier -> consumer
      else
        flow(cur, prev - k1) -= amount;  // consumer -> supplier (undo)
      cur = prev;
    }
    surplus[node] -= amount;
    deficit[target] -= amount;
    remaining -= amount;
  }

  TransportPlan out;
  out.plan = std::move(flow);
  out.cost = 0.0;
  for (int i = 0; i < k1; ++i)
    for (int j = 0; j < k2; ++j) out.cost += out.plan(i, j) * cost(i, j);
  out.dual_u.resize(k1);
  out.dual_v.resize(k2);
  for (int i = 0; i < k1; ++i) out.dual_u[i] = -pot[i];
  for (int j = 0; j < k2; ++j) out.dual_v[j] = pot[k1 + j] + shift;
  out.iterations = augment;
  return out;
}

double log_sum_exp(const std::vector<double>& t) {
  double m = -kInf;
  for (double v : t) m = std::max(m, v);
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (double v : t) s += std::exp(v - m);
  return m + std::log(s);
}

/// Log-domain Sinkhorn with epsilon scaling: anneal from a cost-scale
/// temperature down to the target, carrying the potentials, then iterate at
/// the target until the row marginals meet the tolerance. Stable for small
/// epsilon and large costs.
TransportPlan solve_sinkhorn(const std::vector<double>& a, const std::vector<double>& b,
                             const Matrix& cost, const OtConfig& cfg) {
  const int k1 = static_cast<int>(a.size());
  const int k2 = static_cast<int>(b.size());
  const double eps = cfg.epsilon;
  std::vector<double> loga(k1), logb(k2);
  for (int i = 0; i < k1; ++i) loga[i] = std::log(a[i]);
  for (int j = 0; j < k2; ++j) logb[j] = std::log(b[j]);

  std::vector<double> f(k1, 0.0), g(k2, 0.0), scratch;
  auto sweep = [&](double temperature) {
    for (int i = 0; i < k1; ++i) {
      scratch.assign(k2, 0.0);
      for (int j = 0; j < k2; ++j)
        scratch[j] = (g[j] - cost(i, j)) / temperature + logb[j];
      f[i] = -temperature * log_sum_exp(scratch);
    }
    for (int j = 0; j < k2; ++j) {
      scratch.assign(k1, 0.0);
      for (int i = 0; i < k1; ++i)
        scratch[i] = (f[i] - cost(i, j)) / temperature + loga[i];
      g[j] = -temperature * log_sum_exp(scratch);
    }
  };
  // Column marginals are exact after the g update; rows track convergence.
  auto row_violation = [&]() {
    double v = 0.0;
    for (int i = 0; i < k1; ++i) {
      double row = 0.0;
      for (int j = 0; j < k2; ++j)
        row += std::exp((f[i] + g[j] - cost(i, j)) / eps + loga[i] + logb[j]);
      v = std::max(v, std::fabs(row - a[i]));
    }
    return v;
  };

  int it = 0;
  double max_cost = 0.0;
  for (double c : cost.data) max_cost = std::max(max_cost, std::fabs(c));
  for (double warm = std::max(max_cost, eps); warm > eps && it < cfg.max_iter;
       warm = std::max(eps, warm * 0.5)) {
    for (int s = 0; s < 10 && it < cfg.max_iter; ++s, ++it) sweep(warm);
    if (warm == eps) break;
  }

  double violation = kInf;
  for (; it < cfg.max_iter; ++it) {
    sweep(eps);
    violation = row_violation();
    if (violation <= cfg.tol) break;
  }
  if (violation > cfg.tol)
    throw SolverError("sinkhorn: no convergence after " +
                          std::to_string(cfg.max_iter) + " iterations",
                      violation);

  TransportPlan out;
  out.plan = Matrix(k1, k2);
  out.cost = 0.0;
  for (int i = 0; i < k1; ++i) {
    for (int j = 0; j < k2; ++j) {
      double pij = std::exp((f[i] + g[j] - cost(i, j)) / eps + loga[i] + logb[j]);
      out.plan(i, j) = pij;
      out.cost += pij * cost(i, j);
    }
  }
  out.dual_u = std::move(f);
  out.dual_v = std::move(g);
  out.iterations = it + 1;
  out.marginal_violation = violation;
  return out;
}

}  // namespace

Matrix ground_cost_matrix(const DiscreteMeasure& P, const DiscreteMeasure& Q,
                          const AtomRegistry& reg, const SdtwConfig& cfg,
                          int cost_power) {
  Matrix c(P.size(), Q.size());
  parallel_for(P.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < Q.size(); ++j) {
      double d = reg.divergence(P.atoms[i], Q.atoms[j], cfg);
      c(i, j) = cost_power == 1 ? d : std::pow(d, cost_power);
    }
  });
  return c;
}

TransportPlan ot_cost(const std::vector<double>& p, const std::vector<double>& q,
                      const Matrix& cost, const OtConfig& cfg) {
  if (cost.rows != p.size() || cost.cols != q.size())
    throw DataError("ot_cost: cost matrix shape does not match weights");
  if (p.empty() || q.empty()) throw DataError("ot_cost: empty marginals");
  double sp = std::accumulate(p.begin(), p.end(), 0.0);
  double sq_ = std::accumulate(q.begin(), q.end(), 0.0);
  if (std::fabs(sp - sq_) > 1e-9)
    throw DataError("ot_cost: marginal masses differ");

  // Drop zero-weight atoms; reinsert zero rows/columns afterwards.
  std::vector<int> pi, qi;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) pi.push_back(static_cast<int>(i));
  for (std::size_t j = 0; j < q.size(); ++j)
    if (q[j] > 0.0) qi.push_back(static_cast<int>(j));
  if (pi.empty() || qi.empty()) throw DataError("ot_cost: all-zero marginal");

  std::vector<double> a(pi.size()), b(qi.size());
  Matrix sub(pi.size(), qi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) {
    a[i] = p[pi[i]];
    for (std::size_t j = 0; j < qi.size(); ++j) sub(i, j) = cost(pi[i], qi[j]);
  }
  for (std::size_t j = 0; j < qi.size(); ++j) b[j] = q[qi[j]];

  TransportPlan reduced;
  if (cfg.epsilon == 0.0) {
    if (static_cast<int>(a.size()) > cfg.exact_size_limit ||
        static_cast<int>(b.size()) > cfg.exact_size_limit)
      throw DataError("ot_cost: instance too large for the exact solver");
    reduced = solve_exact(a, b, sub);
  } else {
    reduced = solve_sinkhorn(a, b, sub, cfg);
  }

  TransportPlan out;
  out.plan = Matrix(p.size(), q.size());
  for (std::size_t i = 0; i < pi.size(); ++i)
    for (std::size_t j = 0; j < qi.size(); ++j)
      out.plan(pi[i], qi[j]) = reduced.plan(i, j);
  out.cost = reduced.cost;
  out.iterations = reduced.iterations;
  out.dual_u.assign(p.size(), 0.0);
  out.dual_v.assign(q.size(), 0.0);
  for (std::size_t i = 0; i < pi.size(); ++i) out.dual_u[pi[i]] = reduced.dual_u[i];
  for (std::size_t j = 0; j < qi.size(); ++j) out.dual_v[qi[j]] = reduced.dual_v[j];

  double viol = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) row += out.plan(i, j);
    viol = std::max(viol, std::fabs(row - p[i]));
  }
  for (std::size_t j = 0; j < q.size(); ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) col += out.plan(i, j);
    viol = std::max(viol, std::fabs(col - q[j]));
  }
  out.marginal_violation = viol;
  return out;
}

TransportPlan ot_cost(const DiscreteMeasure& P, const DiscreteMeasure& Q,
                      const Matrix& ground_cost, const OtConfig& cfg) {
  return ot_cost(P.weights, Q.weights, ground_cost, cfg);
}

double w_sdtw(const DiscreteMeasure& P, const DiscreteMeasure& Q,
              const AtomRegistry& reg, const SdtwConfig& sdtw_cfg,
              const OtConfig& ot_cfg) {
  Matrix ground = ground_cost_matrix(P, Q, reg, sdtw_cfg, ot_cfg.cost_power);
  return ot_cost(P, Q, ground, ot_cfg).cost;
}

double w_sdtw_level2(const std::vector<DiscreteMeasure>& support_p,
                     const std::vector<double>& weights_p,
                     const std::vector<DiscreteMeasure>& support_q,
                     const std::vector<double>& weights_q,
                     const AtomRegistry& reg, const SdtwConfig& sdtw_cfg,
                     const OtConfig& ot_cfg) {
  Matrix ground(support_p.size(), support_q.size());
  parallel_for(support_p.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < support_q.size(); ++j)
      ground(i, j) = w_sdtw(support_p[i], support_q[j], reg, sdtw_cfg, ot_cfg);
  });
  return ot_cost(weights_p, weights_q, ground, ot_cfg).cost;
}

}  // namespace htsc
