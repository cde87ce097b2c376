#include "htsc/barycenter.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "htsc/errors.hpp"
#include "htsc/parallel.hpp"

namespace htsc {

namespace {

bool all_identical(const std::vector<DiscreteMeasure>& ms) {
  const auto& first = ms.front();
  for (const auto& m : ms) {
    if (m.atoms != first.atoms || m.weights.size() != first.weights.size())
      return false;
    for (std::size_t k = 0; k < m.weights.size(); ++k)
      if (std::fabs(m.weights[k] - first.weights[k]) > 1e-12) return false;
  }
  return true;
}

/// Distinct atoms across inputs with lambda-aggregated mass, in first-seen
/// order for determinism.
std::vector<std::pair<std::size_t, double>> pooled_atoms(
    const std::vector<DiscreteMeasure>& ms, const std::vector<double>& lambda) {
  std::vector<std::pair<std::size_t, double>> pool;
  std::map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    for (std::size_t k = 0; k < ms[i].size(); ++k) {
      auto [it, inserted] = slot.emplace(ms[i].atoms[k], pool.size());
      if (inserted) pool.emplace_back(ms[i].atoms[k], 0.0);
      pool[it->second].second += lambda[i] * ms[i].weights[k];
    }
  }
  return pool;
}

/// Mass-weighted k-means++ style selection of initial support atoms.
std::vector<std::size_t> seed_support(
    const std::vector<std::pair<std::size_t, double>>& pool, std::size_t s,
    const AtomRegistry& reg, const SdtwConfig& cfg, Rng& rng) {
  std::vector<std::size_t> chosen;
  std::vector<double> mass(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) mass[i] = pool[i].second;
  chosen.push_back(rng.sample_weighted(mass));
  std::vector<double> min_d(pool.size(), 0.0);
  for (std::size_t i = 0; i < pool.size(); ++i)
    min_d[i] = reg.divergence(pool[i].first, pool[chosen[0]].first, cfg);
  while (chosen.size() < s) {
    std::vector<double> score(pool.size());
    double total = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      score[i] = mass[i] * std::max(0.0, min_d[i]);
      total += score[i];
    }
    std::size_t next;
    if (total > 0.0) {
      next = rng.sample_weighted(score);
    } else {
      // All remaining atoms coincide with a chosen one; take the first unchosen.
      next = pool.size();
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
          next = i;
          break;
        }
      }
      if (next == pool.size()) break;
    }
    chosen.push_back(next);
    for (std::size_t i = 0; i < pool.size(); ++i)
      min_d[i] = std::min(min_d[i], reg.divergence(pool[i].first, pool[next].first, cfg));
  }
  std::vector<std::size_t> ids;
  ids.reserve(chosen.size());
  for (std::size_t c : chosen) ids.push_back(pool[c].first);
  return ids;
}

}  // namespace

BarycenterResult free_support_barycenter(
    const std::vector<DiscreteMeasure>& measures, const std::vector<double>& lambda,
    int support_size, AtomRegistry& reg, const SdtwConfig& sdtw_cfg,
    const OtConfig& ot_cfg, const MeanConfig& mean_cfg, const BarycenterConfig& cfg,
    Rng& rng, const DiscreteMeasure* init) {
  if (measures.empty()) throw std::invalid_argument("barycenter: no input measures");
  if (measures.size() != lambda.size())
    throw std::invalid_argument("barycenter: lambda size mismatch");
  if (support_size < 1) throw std::invalid_argument("barycenter: support_size must be >= 1");

  BarycenterResult res;
  if (all_identical(measures)) {
    res.measure = measures.front();
    res.objective_trace = {0.0};
    return res;
  }

  auto pool = pooled_atoms(measures, lambda);
  std::size_t s = static_cast<std::size_t>(support_size);
  if (s > pool.size()) {
    s = pool.size();
    res.clamped = true;
  }

  std::vector<std::size_t> support;
  if (init && init->size() == s)
    support = init->atoms;
  else
    support = seed_support(pool, s, reg, sdtw_cfg, rng);

  const std::vector<double> v(s, 1.0 / static_cast<double>(s));
  auto as_measure = [&](const std::vector<std::size_t>& atoms) {
    DiscreteMeasure m;
    m.atoms = atoms;
    m.weights = v;
    return m;
  };

  double prev_obj = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> prev_support;

  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    DiscreteMeasure nu = as_measure(support);
    std::vector<TransportPlan> plans(measures.size());
    parallel_for(measures.size(), [&](std::size_t i) {
      Matrix ground = ground_cost_matrix(measures[i], nu, reg, sdtw_cfg, ot_cfg.cost_power);
      plans[i] = ot_cost(measures[i], nu, ground, ot_cfg);
    });
    double obj = 0.0;
    for (std::size_t i = 0; i < measures.size(); ++i) obj += lambda[i] * plans[i].cost;

    if (obj > prev_obj + 1e-12 * (1.0 + std::fabs(prev_obj))) {
      // Inner-solver noise pushed the objective up; keep the previous support.
      support = prev_support;
      break;
    }
    res.objective_trace.push_back(std::min(obj, prev_obj));
    if (std::fabs(prev_obj - obj) <= cfg.rel_tol * std::max(1.0, std::fabs(obj)) &&
        outer > 0)
      break;
    prev_obj = obj;
    prev_support = support;
    if (outer == cfg.max_outer - 1) break;  // no support update without re-scoring

    // Support update: each atom becomes the divergence mean of the input
    // atoms that ship mass to it, seeded at its current position.
    std::vector<std::size_t> next_support(s);
    std::vector<TimeSeries> new_atoms(s);
    parallel_for(s, [&](std::size_t j) {
      std::map<std::size_t, double> incoming;
      for (std::size_t i = 0; i < measures.size(); ++i) {
        for (std::size_t k = 0; k < measures[i].size(); ++k) {
          double mass = lambda[i] * plans[i].plan(k, j);
          if (mass > 0.0) incoming[measures[i].atoms[k]] += mass;
        }
      }
      if (incoming.empty()) {
        new_atoms[j] = reg.atom(support[j]);
        return;
      }
      std::vector<const TimeSeries*> members;
      std::vector<double> w;
      for (const auto& [atom_id, mass] : incoming) {
        members.push_back(&reg.atom(atom_id));
        w.push_back(mass);
      }
      MeanResult mr = sdtw_mean(members, w, reg.atom(support[j]), sdtw_cfg, mean_cfg);
      new_atoms[j] = std::move(mr.mean);
    });
    for (std::size_t j = 0; j < s; ++j) next_support[j] = reg.add(std::move(new_atoms[j]));
    support = next_support;
  }

  res.measure = as_measure(support);
  return res;
}

}  // namespace htsc
