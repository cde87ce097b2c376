#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "htsc/errors.hpp"
#include "htsc/forecast.hpp"
#include "htsc/rng.hpp"
#include "htsc/synth.hpp"
#include "oracles.hpp"

using namespace htsc;
using oracle::make_series;

namespace {

Hierarchy example_tree() {
  return make_hierarchy({1, 2, 2, 3, 3, 3, 3, 3}, {-1, 0, 0, 1, 1, 1, 2, 2});
}

}  // namespace

TEST_CASE("fuzzy weights: symmetry, zero limit, and the pinned two-cluster case") {
  auto uniform = fuzzy_weights({3.0, 3.0, 3.0, 3.0}, 2.0);
  for (double w : uniform) CHECK(w == doctest::Approx(0.25));
  auto uniform5 = fuzzy_weights({0.7, 0.7}, 5.0);
  for (double w : uniform5) CHECK(w == doctest::Approx(0.5));

  auto hard = fuzzy_weights({0.0, 5.0, 9.0}, 2.0);
  CHECK(hard[0] == 1.0);
  CHECK(hard[1] == 0.0);
  CHECK(hard[2] == 0.0);

  // d = (1, 2), m = 2: w_1 = 1 / (1 + (1/2)^2) = 0.8.
  auto two = fuzzy_weights({1.0, 2.0}, 2.0);
  CHECK(two[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("fuzzy weights stay on the simplex and order by distance") {
  Rng rng(81);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> d(2 + rng.index(6));
    for (auto& v : d) v = rng.uniform(0.01, 10.0);
    double m = rng.uniform(1.2, 6.0);
    auto w = fuzzy_weights(d, m);
    double total = 0.0;
    for (double v : w) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(w[i] >= 0.0);
      CHECK(w[i] <= 1.0);
      for (std::size_t j = 0; j < d.size(); ++j)
        if (d[i] < d[j]) CHECK(w[i] >= w[j] - 1e-12);
    }
  }
}

TEST_CASE("fuzziness limits: uniform as m grows, argmin as m -> 1") {
  std::vector<double> d = {1.0, 2.0, 4.0};
  auto soft = fuzzy_weights(d, 1e6);
  for (double w : soft) CHECK(std::fabs(w - 1.0 / 3.0) < 1e-3);

  auto crisp = fuzzy_weights(d, 1.0 + 1e-6);
  CHECK(std::fabs(crisp[0] - 1.0) < 1e-3);
  CHECK(crisp[1] < 1e-3);
  CHECK(crisp[2] < 1e-3);
}

TEST_CASE("combining forecasts") {
  auto f1 = make_series({2, 4});
  auto f2 = make_series({4, 8});
  auto keep = combine_forecasts({1.0, 0.0}, {&f1, &f2}, 2);
  CHECK(keep.values == f1.values);  // bitwise pass-through

  auto same = combine_forecasts({0.3, 0.7}, {&f1, &f1}, 2);
  CHECK(same.values[0] == doctest::Approx(2.0));
  CHECK(same.values[1] == doctest::Approx(4.0));

  auto mix = combine_forecasts({0.5, 0.5}, {&f1, &f2}, 2);
  CHECK(mix.values == std::vector<double>{3.0, 6.0});

  CHECK_THROWS_AS(combine_forecasts({1.0}, {&f1}, 5), DataError);
}

TEST_CASE("coherent projection on the 8-node example") {
  Hierarchy h = example_tree();
  std::vector<TimeSeries> fc(8);
  for (int b = 0; b < 5; ++b) fc[3 + b].values = {1.0};
  coherent_projection(h, fc);
  CHECK(fc[0].values[0] == 5.0);  // root spans all five leaves
  CHECK(fc[1].values[0] == 3.0);  // three-leaf group
  CHECK(fc[2].values[0] == 2.0);  // two-leaf group

  // Idempotence: projecting a coherent state changes nothing.
  auto again = fc;
  coherent_projection(h, again);
  for (int i = 0; i < 8; ++i) CHECK(again[i].values == fc[i].values);
}

TEST_CASE("projection satisfies the summation constraint exactly") {
  Hierarchy h = example_tree();
  Rng rng(83);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<TimeSeries> fc(8);
    for (int b = 0; b < 5; ++b) {
      fc[3 + b].values.resize(4);
      for (auto& v : fc[3 + b].values) v = rng.uniform(-5, 5);
    }
    coherent_projection(h, fc);
    for (int i = 0; i < h.aggregated_count; ++i) {
      for (int t = 0; t < 4; ++t) {
        double sum = 0.0;  // same ascending-order summation as the library
        for (int b : h.bottom_descendants[i]) sum += fc[h.bottom_nodes[b]].values[t];
        CHECK(fc[i].values[t] == sum);
      }
    }
  }
}

TEST_CASE("MASE definition and degenerate history") {
  std::vector<double> insample = {1, 3, 2, 5, 4};
  std::vector<double> actual = {6, 7};
  CHECK(mase(actual, actual, insample) == 0.0);

  // Last-value forecast on a short random walk, against the direct formula.
  std::vector<double> fc = {4, 4};
  double denom = (std::fabs(3.0 - 1) + std::fabs(2.0 - 3) + std::fabs(5.0 - 2) +
                  std::fabs(4.0 - 5)) /
                 4.0;
  double num = (std::fabs(6.0 - 4) + std::fabs(7.0 - 4)) / 2.0;
  CHECK(mase(actual, fc, insample) == doctest::Approx(num / denom));

  CHECK_THROWS_AS(mase(actual, fc, {2, 2, 2, 2}), DataError);
}

TEST_CASE("AR(2) baseline is deterministic and tracks a trend") {
  TimeSeries hist;
  for (int t = 0; t < 60; ++t)
    hist.values.push_back(0.5 * t + 3.0);
  Ar2Forecaster f;
  f.fit(hist);
  auto p1 = f.predict(5);
  auto p2 = f.clone()->predict(5);
  CHECK(p1.values == p2.values);
  REQUIRE(p1.length() == 5);
  for (int h = 0; h < 5; ++h)
    CHECK(p1.values[h] == doctest::Approx(0.5 * (60 + h) + 3.0).epsilon(0.05));

  TimeSeries tiny;
  tiny.values = {2.0, 2.0};
  Ar2Forecaster g;
  g.fit(tiny);
  auto p3 = g.predict(3);
  CHECK(p3.values == std::vector<double>{2.0, 2.0, 2.0});
}

TEST_CASE("split sizes follow the 0.6/0.2/0.2 protocol") {
  auto s = split_sizes(100);
  CHECK(s.train == 60);
  CHECK(s.validation == 20);
  CHECK(s.test == 20);
  auto tiny = split_sizes(5);
  CHECK(tiny.test >= 1);
  CHECK(tiny.train >= 1);
  CHECK(tiny.train + tiny.validation + tiny.test == 5);
}

namespace {

/// A model whose clusters are exactly the per-level singletons, with raw
/// means equal to the original series (what the pipeline produces for
/// k = item count on distinct data).
MultiLevelClusterModel degenerate_model(const HtsDataset& ds) {
  MultiLevelClusterModel model;
  model.mode = ClusterMode::multilevel;
  model.levels = ds.levels;
  model.config.sdtw.gamma = 1.0;
  for (int l = 1; l <= ds.levels; ++l) {
    LevelClusterModel lm;
    lm.level = l;
    auto entries = level_series(ds, l);
    lm.k = static_cast<int>(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      lm.items.emplace_back(entries[i].instance, entries[i].node);
      lm.assignment.push_back(static_cast<int>(i));
      lm.raw_means.push_back(*entries[i].series);
    }
    lm.loss_trace = {0.0};
    model.per_level.emplace(l, std::move(lm));
  }
  return model;
}

}  // namespace

TEST_CASE("degenerate per-series clustering reproduces the per-series pipeline") {
  SynthConfig s;
  s.offsets = {0, 10};
  s.instances_per_cluster = 2;
  s.branching = {2};
  s.length_min = 25;
  s.length_max = 30;
  s.seed = 85;
  Benchmark b = generate_benchmark(s);

  auto model = degenerate_model(b.dataset);
  Ar2Forecaster ar2;
  std::vector<int> horizons(b.dataset.instances.size(), 6);
  auto clustered = forecast_with_clusters(b.dataset, model, ar2, horizons, 2.0);
  auto baseline = forecast_per_series(b.dataset, ar2, horizons);

  CHECK(clustered.report.fits == baseline.report.fits);
  for (std::size_t j = 0; j < b.dataset.instances.size(); ++j) {
    for (int i = 0; i < b.dataset.instances[j].hierarchy.node_count; ++i) {
      CHECK(clustered.forecasts[j][i].values == baseline.forecasts[j][i].values);
    }
  }
  // Identical forecasts imply identical MASE on any holdout.
}

TEST_CASE("single-cluster model hands every bottom node the same forecast") {
  SynthConfig s;
  s.offsets = {3};
  s.instances_per_cluster = 3;
  s.branching = {2};
  s.length_min = 20;
  s.length_max = 20;
  s.seed = 86;
  Benchmark b = generate_benchmark(s);

  MultiLevelClusterModel model;
  model.mode = ClusterMode::multilevel;
  model.levels = 2;
  model.config.sdtw.gamma = 1.0;
  for (int l = 1; l <= 2; ++l) {
    LevelClusterModel lm;
    lm.level = l;
    auto entries = level_series(b.dataset, l);
    lm.k = 1;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      lm.items.emplace_back(entries[i].instance, entries[i].node);
      lm.assignment.push_back(0);
    }
    lm.raw_means.push_back(*entries[0].series);
    lm.loss_trace = {0.0};
    model.per_level.emplace(l, std::move(lm));
  }

  Ar2Forecaster ar2;
  auto res = forecast_with_clusters(b.dataset, model, ar2, 4, 2.0);
  CHECK(res.report.fits == 2);  // one mean per level

  Ar2Forecaster ref;
  ref.fit(model.per_level.at(2).raw_means[0]);
  auto want = ref.predict(4);
  for (std::size_t j = 0; j < b.dataset.instances.size(); ++j) {
    const auto& h = b.dataset.instances[j].hierarchy;
    for (int bidx : h.bottom_nodes)
      CHECK(res.forecasts[j][bidx].values == want.values);
  }
}

TEST_CASE("cluster-mean forecasting is coherent and counts fits") {
  SynthConfig s;
  s.offsets = {0, 9};
  s.instances_per_cluster = 3;
  s.branching = {2, 2};
  s.length_min = 24;
  s.length_max = 30;
  s.seed = 87;
  Benchmark b = generate_benchmark(s);

  ClusterConfig cfg;
  cfg.k_per_level = {{1, 2}, {2, 2}, {3, 2}};
  cfg.seed = 87;
  cfg.mean.max_iter = 40;
  auto run = cluster_hts(b.dataset, cfg);

  Ar2Forecaster ar2;
  auto res = forecast_with_clusters(b.dataset, run.model, ar2, 5, 2.0);
  long long want_fits = 0;
  for (const auto& [l, lm] : run.model.per_level) want_fits += lm.k;
  CHECK(res.report.fits == want_fits);

  for (std::size_t j = 0; j < b.dataset.instances.size(); ++j) {
    const auto& h = b.dataset.instances[j].hierarchy;
    for (int i = 0; i < h.aggregated_count; ++i) {
      for (int t = 0; t < 5; ++t) {
        double sum = 0.0;
        for (int bp : h.bottom_descendants[i])
          sum += res.forecasts[j][h.bottom_nodes[bp]].values[t];
        CHECK(res.forecasts[j][i].values[t] == sum);
      }
    }
  }
}
