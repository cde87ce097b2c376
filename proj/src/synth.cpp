#include "htsc/synth.hpp"

#include <set>
#include <string>

#include "htsc/errors.hpp"
#include "htsc/rng.hpp"

namespace htsc {

TimeSeries simulate_arma(int length, double offset, double noise_std,
                         std::uint64_t seed, int burn_in) {
  if (length < 1) throw DataError("simulate_arma: length must be >= 1");
  Rng rng(seed);
  TimeSeries ts;
  ts.values.reserve(length);
  double x1 = 0.0, x2 = 0.0;  // x_{t-1}, x_{t-2}
  double e1 = 0.0, e2 = 0.0;  // e_{t-1}, e_{t-2}
  for (int t = 0; t < burn_in + length; ++t) {
    double e = noise_std > 0.0 ? rng.normal(0.0, noise_std) : 0.0;
    double x = 0.75 * x1 - 0.25 * x2 + 0.65 * e1 + 0.35 * e2 + e + offset;
    x2 = x1;
    x1 = x;
    e2 = e1;
    e1 = e;
    if (t >= burn_in) ts.values.push_back(x);
  }
  return ts;
}

Benchmark generate_benchmark(const SynthConfig& cfg) {
  if (cfg.offsets.empty()) throw DataError("generate_benchmark: no cluster offsets");
  if (std::set<double>(cfg.offsets.begin(), cfg.offsets.end()).size() !=
      cfg.offsets.size())
    throw DataError("generate_benchmark: offsets must be distinct");
  if (cfg.instances_per_cluster < 1)
    throw DataError("generate_benchmark: instances_per_cluster must be >= 1");
  if (cfg.length_min < 3 || cfg.length_max < cfg.length_min)
    throw DataError("generate_benchmark: need length_max >= length_min >= 3");

  const Hierarchy tmpl = uniform_hierarchy(cfg.branching);
  const int k_true = static_cast<int>(cfg.offsets.size());
  const int total = k_true * cfg.instances_per_cluster;

  Benchmark bench;
  bench.dataset.levels = tmpl.levels;
  bench.dataset.instances.resize(total);
  for (int j = 0; j < total; ++j) {
    const int label = j / cfg.instances_per_cluster;
    Rng inst_rng(derive_seed(cfg.seed, "length", static_cast<std::uint64_t>(j)));
    const int length =
        static_cast<int>(inst_rng.integer(cfg.length_min, cfg.length_max));

    HtsInstance inst;
    inst.id = "inst" + std::to_string(j);
    inst.hierarchy = tmpl;
    inst.series.resize(tmpl.node_count);
    for (int b = 0; b < tmpl.bottom_count; ++b) {
      int node = tmpl.bottom_nodes[b];
      std::uint64_t node_seed = derive_seed(
          derive_seed(cfg.seed, "instance", static_cast<std::uint64_t>(j)), "node",
          static_cast<std::uint64_t>(b));
      inst.series[node] =
          simulate_arma(length, cfg.offsets[label], cfg.noise_std, node_seed, cfg.burn_in);
      inst.series[node].id = "n" + std::to_string(node);
    }
    // Aggregates are exact sums over bottom descendants in ascending order.
    for (int i = tmpl.aggregated_count - 1; i >= 0; --i) {
      TimeSeries agg;
      agg.id = "n" + std::to_string(i);
      agg.values.assign(length, 0.0);
      for (int b : tmpl.bottom_descendants[i]) {
        const auto& src = inst.series[tmpl.bottom_nodes[b]].values;
        for (int t = 0; t < length; ++t) agg.values[t] += src[t];
      }
      inst.series[i] = std::move(agg);
    }
    bench.dataset.instances[j] = std::move(inst);
  }

  for (int l = 1; l <= tmpl.levels; ++l) {
    auto entries = level_series(bench.dataset, l);
    std::vector<int> labels;
    labels.reserve(entries.size());
    for (const auto& e : entries) labels.push_back(e.instance / cfg.instances_per_cluster);
    bench.labels[l] = std::move(labels);
  }
  return bench;
}

}  // namespace htsc
