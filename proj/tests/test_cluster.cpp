#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "htsc/cluster.hpp"
#include "htsc/errors.hpp"
#include "htsc/metrics.hpp"
#include "htsc/model_io.hpp"
#include "htsc/synth.hpp"
#include "oracles.hpp"

using namespace htsc;
using oracle::make_series;

namespace {

ClusterConfig small_config(std::uint64_t seed = 0) {
  ClusterConfig cfg;
  cfg.seed = seed;
  cfg.mean.max_iter = 60;
  cfg.barycenter.max_outer = 8;
  cfg.max_outer_iter = 40;
  return cfg;
}

SynthConfig small_benchmark(std::vector<double> offsets, int per_cluster,
                            std::vector<int> branching, std::uint64_t seed) {
  SynthConfig s;
  s.offsets = std::move(offsets);
  s.instances_per_cluster = per_cluster;
  s.branching = std::move(branching);
  s.length_min = 20;
  s.length_max = 32;
  s.noise_std = 1.0;
  s.seed = seed;
  return s;
}

double ari_against(const std::vector<int>& truth, const std::vector<int>& predicted) {
  return metrics::ari(metrics::Partition{truth}, metrics::Partition{predicted});
}

void check_nonincreasing(const std::vector<double>& trace, double slack = 1e-10) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] + slack);
}

}  // namespace

TEST_CASE("k=1 gathers everything into one cluster") {
  std::vector<TimeSeries> data;
  for (int i = 0; i < 6; ++i)
    data.push_back(make_series({double(i), double(i + 1), double(i + 2)}));
  std::vector<const TimeSeries*> ptrs;
  for (auto& d : data) ptrs.push_back(&d);
  ClusterConfig cfg = small_config();
  Rng rng(1);
  auto model = cluster_bottom_level(ptrs, 1, cfg, rng);
  CHECK(model.k == 1);
  for (int z : model.assignment) CHECK(z == 0);
  check_nonincreasing(model.loss_trace);
  REQUIRE(model.raw_means.size() == 1);
  // The centroid is a converged divergence mean: restarting the optimizer
  // from it gains at most tolerance-level improvement.
  auto res = sdtw_mean(ptrs, model.raw_means[0], cfg.sdtw, cfg.mean);
  CHECK(res.trace.front() - res.trace.back() <=
        1e-4 * (1.0 + std::fabs(res.trace.front())));
}

TEST_CASE("two well separated groups are recovered exactly") {
  std::vector<TimeSeries> data;
  std::vector<int> truth;
  for (int i = 0; i < 5; ++i) {
    data.push_back(make_series({0.0 + 0.01 * i, 0.0, 0.0, 0.01 * i}));
    truth.push_back(0);
  }
  for (int i = 0; i < 5; ++i) {
    data.push_back(make_series({100.0 + 0.01 * i, 100.0, 100.0, 100.0}));
    truth.push_back(1);
  }
  std::vector<const TimeSeries*> ptrs;
  for (auto& d : data) ptrs.push_back(&d);
  ClusterConfig cfg = small_config();
  Rng rng(2);
  auto model = cluster_bottom_level(ptrs, 2, cfg, rng);
  CHECK(ari_against(truth, model.assignment) == doctest::Approx(1.0));
  check_nonincreasing(model.loss_trace);
}

TEST_CASE("k equal to the item count yields singleton clusters at zero loss") {
  std::vector<TimeSeries> data;
  for (int i = 0; i < 4; ++i)
    data.push_back(make_series({10.0 * i, 10.0 * i + 1, 5.0 * i}));
  std::vector<const TimeSeries*> ptrs;
  for (auto& d : data) ptrs.push_back(&d);
  ClusterConfig cfg = small_config();
  Rng rng(3);
  auto model = cluster_bottom_level(ptrs, 4, cfg, rng);
  std::vector<int> sorted = model.assignment;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3});
  CHECK(model.loss_trace.back() == doctest::Approx(0.0));
}

TEST_CASE("assignments are exhaustively optimal after convergence") {
  SynthConfig s = small_benchmark({0, 10}, 3, {2}, 17);
  Benchmark b = generate_benchmark(s);
  auto entries = level_series(b.dataset, 2);
  std::vector<const TimeSeries*> ptrs;
  for (auto& e : entries) ptrs.push_back(e.series);
  ClusterConfig cfg = small_config(5);
  Rng rng(5);
  auto model = cluster_bottom_level(ptrs, 2, cfg, rng);
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    double assigned = sdtw_divergence(*ptrs[i], model.raw_means[model.assignment[i]], cfg.sdtw);
    for (int c = 0; c < model.k; ++c)
      CHECK(assigned <= sdtw_divergence(*ptrs[i], model.raw_means[c], cfg.sdtw) + 1e-10);
  }
}

TEST_CASE("measure lifting follows child cluster fractions") {
  SynthConfig s = small_benchmark({0, 5, 11}, 1, {4}, 23);
  Benchmark b = generate_benchmark(s);
  AtomRegistry reg;

  LevelClusterModel lower;
  lower.level = 2;
  lower.k = 3;
  lower.items = [&] {
    std::vector<std::pair<int, int>> items;
    for (const auto& e : level_series(b.dataset, 2)) items.emplace_back(e.instance, e.node);
    return items;
  }();
  lower.raw_means = {make_series({0, 0}, "m0"), make_series({5, 5}, "m1"),
                     make_series({11, 11}, "m2")};

  SUBCASE("4 children split 2/1/1") {
    lower.assignment = {0, 0, 1, 2, /*inst1*/ 0, 0, 0, 0, /*inst2*/ 2, 2, 2, 2};
    auto measures = lift_to_measures(b.dataset, 1, lower, reg);
    REQUIRE(measures.size() == 3);
    CHECK(measures[0].weights == std::vector<double>{0.5, 0.25, 0.25});
    CHECK(measures[0].atoms.size() == 3);
    // All children in one cluster -> a point mass.
    CHECK(measures[1].atoms.size() == 1);
    CHECK(measures[1].weights == std::vector<double>{1.0});
    CHECK(reg.atom(measures[1].atoms[0]).id == "m0");
    CHECK(reg.atom(measures[2].atoms[0]).id == "m2");
  }

  SUBCASE("uncovered child is a structural error") {
    lower.assignment = {0, 0, 1, 2, 0, 0, 0, 0, 2, 2, 2, 2};
    lower.items.pop_back();
    lower.assignment.pop_back();
    CHECK_THROWS_AS(lift_to_measures(b.dataset, 1, lower, reg), DataError);
  }
}

TEST_CASE("single-child nodes lift to point masses") {
  SynthConfig s = small_benchmark({0, 4}, 2, {1}, 29);  // one child per root
  Benchmark b = generate_benchmark(s);
  AtomRegistry reg;
  LevelClusterModel lower;
  lower.level = 2;
  lower.k = 2;
  for (const auto& e : level_series(b.dataset, 2)) lower.items.emplace_back(e.instance, e.node);
  lower.assignment = {0, 0, 1, 1};
  lower.raw_means = {make_series({0, 0}), make_series({8, 8})};
  auto measures = lift_to_measures(b.dataset, 1, lower, reg);
  for (const auto& m : measures) {
    CHECK(m.atoms.size() == 1);
    CHECK(m.weights[0] == 1.0);
  }
}

TEST_CASE("identical measures collapse to one cluster at zero loss") {
  AtomRegistry reg;
  auto a0 = reg.add(make_series({1, 2, 3}));
  auto a1 = reg.add(make_series({4, 4, 4}));
  std::vector<DiscreteMeasure> measures(5, DiscreteMeasure{{a0, a1}, {0.5, 0.5}});
  ClusterConfig cfg = small_config(7);
  Rng rng(7);
  auto model = cluster_aggregated_level(measures, 2, 2, cfg, reg, rng);
  merge_remove_postprocess(model, measures, 2, /*merge_eps=*/-1.0, /*remove_eps=*/1,
                           cfg, reg, rng);
  CHECK(model.k == 1);
  CHECK(model.post_trace.back() == doctest::Approx(0.0));
  for (int z : model.assignment) CHECK(z == 0);
}

TEST_CASE("point masses on far atoms split perfectly") {
  AtomRegistry reg;
  auto lo = reg.add(make_series({0, 0, 0, 0}));
  auto hi = reg.add(make_series({50, 50, 50, 50}));
  std::vector<DiscreteMeasure> measures;
  std::vector<int> truth;
  for (int i = 0; i < 4; ++i) {
    measures.push_back(point_mass(lo));
    truth.push_back(0);
  }
  for (int i = 0; i < 4; ++i) {
    measures.push_back(point_mass(hi));
    truth.push_back(1);
  }
  ClusterConfig cfg = small_config(8);
  Rng rng(8);
  auto model = cluster_aggregated_level(measures, 2, 1, cfg, reg, rng);
  CHECK(ari_against(truth, model.assignment) == doctest::Approx(1.0));
  check_nonincreasing(model.loss_trace);
}

TEST_CASE("k=1 aggregated loss equals the total distance to the barycenter") {
  AtomRegistry reg;
  Rng data_rng(9);
  std::vector<DiscreteMeasure> measures;
  for (int m = 0; m < 4; ++m) {
    std::vector<std::size_t> atoms;
    for (int a = 0; a < 2; ++a) {
      std::vector<double> v(5);
      for (auto& x : v) x = data_rng.uniform(-3, 3);
      atoms.push_back(reg.add(make_series(v)));
    }
    measures.push_back({atoms, {0.5, 0.5}});
  }
  ClusterConfig cfg = small_config(10);
  Rng rng(10);
  auto model = cluster_aggregated_level(measures, 1, 2, cfg, reg, rng);
  REQUIRE(model.barycenters.size() == 1);
  DiscreteMeasure nu;
  nu.weights = model.barycenters[0].weights;
  for (const auto& atom : model.barycenters[0].atoms) nu.atoms.push_back(reg.add(atom));
  double total = 0.0;
  for (const auto& m : measures) total += w_sdtw(m, nu, reg, cfg.sdtw, cfg.ot);
  CHECK(model.loss_trace.back() == doctest::Approx(total).epsilon(1e-8));
}

TEST_CASE("refined means reproduce members on degenerate clusters") {
  SynthConfig s = small_benchmark({0, 7}, 2, {2}, 31);
  Benchmark b = generate_benchmark(s);
  ClusterConfig cfg = small_config(11);

  LevelClusterModel model;
  model.level = 1;
  model.k = 4;
  for (const auto& e : level_series(b.dataset, 1)) model.items.emplace_back(e.instance, e.node);
  model.assignment = {0, 1, 2, 3};  // four singleton clusters
  Rng rng(11);
  auto means = refine_level_means(b.dataset, 1, model, cfg, rng);
  auto entries = level_series(b.dataset, 1);
  for (int c = 0; c < 4; ++c) CHECK(means[c].values == entries[c].series->values);

  // A cluster of identical series refines to that series.
  HtsDataset twin;
  twin.levels = 1;
  for (int i = 0; i < 3; ++i) {
    HtsInstance inst;
    inst.id = "t" + std::to_string(i);
    inst.hierarchy = make_hierarchy({1}, {-1});
    inst.series = {make_series({2, 4, 6}, "r")};
    twin.instances.push_back(inst);
  }
  LevelClusterModel tm;
  tm.level = 1;
  tm.k = 1;
  for (const auto& e : level_series(twin, 1)) tm.items.emplace_back(e.instance, e.node);
  tm.assignment = {0, 0, 0};
  Rng rng2(12);
  auto tmeans = refine_level_means(twin, 1, tm, cfg, rng2);
  CHECK(tmeans[0].values == std::vector<double>{2, 4, 6});
}

TEST_CASE("merge and remove post-processing") {
  ClusterConfig cfg = small_config(13);

  SUBCASE("identical means merge into one cluster") {
    std::vector<TimeSeries> data;
    for (int i = 0; i < 6; ++i) data.push_back(make_series({1, 2, 3}));
    std::vector<const TimeSeries*> ptrs;
    for (auto& d : data) ptrs.push_back(&d);
    LevelClusterModel model;
    model.k = 2;
    model.assignment = {0, 0, 0, 1, 1, 1};
    model.loss_trace = {0.0};
    model.raw_means = {make_series({1, 2, 3}), make_series({1, 2, 3})};
    merge_remove_postprocess(model, ptrs, /*merge_eps=*/0.5, /*remove_eps=*/0, cfg);
    CHECK(model.k == 1);
    for (int z : model.assignment) CHECK(z == 0);
  }

  SUBCASE("zero thresholds leave the model unchanged") {
    std::vector<TimeSeries> data = {make_series({0, 0}), make_series({0, 0}),
                                    make_series({9, 9}), make_series({9, 9})};
    std::vector<const TimeSeries*> ptrs;
    for (auto& d : data) ptrs.push_back(&d);
    LevelClusterModel model;
    model.k = 2;
    model.assignment = {0, 0, 1, 1};
    model.loss_trace = {0.0};
    model.raw_means = {make_series({0, 0}), make_series({9, 9})};
    merge_remove_postprocess(model, ptrs, 0.0, 0, cfg);
    CHECK(model.k == 2);
    CHECK(model.assignment == std::vector<int>{0, 0, 1, 1});
  }

  SUBCASE("a singleton cluster is removed and its member reassigned") {
    std::vector<TimeSeries> data;
    std::vector<double> levels = {0, 0, 10, 10, 20, 20, 30, 30, 40};
    for (double v : levels) data.push_back(make_series({v, v, v}));
    std::vector<const TimeSeries*> ptrs;
    for (auto& d : data) ptrs.push_back(&d);
    LevelClusterModel model;
    model.k = 5;
    model.assignment = {0, 0, 1, 1, 2, 2, 3, 3, 4};
    model.loss_trace = {0.0};
    for (int c = 0; c < 5; ++c) model.raw_means.push_back(make_series({10.0 * c, 10.0 * c, 10.0 * c}));
    merge_remove_postprocess(model, ptrs, 0.0, /*remove_eps=*/1, cfg);
    CHECK(model.k == 4);
    CHECK(model.assignment[8] == 3);  // orphan joins the nearest survivor
    check_nonincreasing(model.post_trace);
  }

  SUBCASE("removing every cluster is an error") {
    std::vector<TimeSeries> data = {make_series({0, 0}), make_series({9, 9})};
    std::vector<const TimeSeries*> ptrs = {&data[0], &data[1]};
    LevelClusterModel model;
    model.k = 2;
    model.assignment = {0, 1};
    model.loss_trace = {0.0};
    model.raw_means = {make_series({0, 0}), make_series({9, 9})};
    CHECK_THROWS_AS(merge_remove_postprocess(model, ptrs, 0.0, 5, cfg), DataError);
  }
}

TEST_CASE("bottom-up multilevel pipeline on a small benchmark") {
  SynthConfig s = small_benchmark({0, 12, 24}, 3, {2, 2}, 37);
  Benchmark b = generate_benchmark(s);
  ClusterConfig cfg = small_config(41);
  cfg.k_per_level = {{1, 3}, {2, 3}, {3, 3}};

  auto run = cluster_hts(b.dataset, cfg);
  const auto& model = run.model;
  REQUIRE(model.per_level.size() == 3);

  for (const auto& [level, lm] : model.per_level) {
    check_nonincreasing(lm.loss_trace);
    check_nonincreasing(lm.post_trace);
    CHECK(!lm.raw_means.empty());
    if (level < 3) CHECK(lm.barycenters.size() == static_cast<std::size_t>(lm.k));
  }

  auto breakdown = objective_value(b.dataset, model);
  for (const auto& [level, lm] : model.per_level) {
    CHECK(breakdown.per_level.at(level) ==
          doctest::Approx(lm.final_loss()).epsilon(1e-8));
  }
  CHECK(breakdown.total == doctest::Approx([&] {
          double t = 0;
          for (const auto& [l, lm] : model.per_level) t += lm.final_loss();
          return t;
        }()).epsilon(1e-8));

  // Bottom-level recovery on this well separated instance.
  CHECK(ari_against(b.labels.at(3), model.per_level.at(3).assignment) >= 0.9);
}

TEST_CASE("perturbing one assignment away from the argmin raises the objective") {
  SynthConfig s = small_benchmark({0, 15}, 3, {2}, 43);
  Benchmark b = generate_benchmark(s);
  ClusterConfig cfg = small_config(43);
  cfg.k_per_level = {{1, 2}, {2, 2}};
  auto run = cluster_hts(b.dataset, cfg);
  auto base = objective_value(b.dataset, run.model);

  MultiLevelClusterModel perturbed = run.model;
  auto& bottom = perturbed.per_level.at(2);
  REQUIRE(bottom.k >= 2);
  bottom.assignment[0] = (bottom.assignment[0] + 1) % bottom.k;
  auto worse = objective_value(b.dataset, perturbed);
  CHECK(worse.total > base.total);
}

TEST_CASE("degenerate chain dataset clusters at zero loss everywhere") {
  HtsDataset ds;
  ds.levels = 3;
  HtsInstance inst;
  inst.id = "chain";
  inst.hierarchy = make_hierarchy({1, 2, 3}, {-1, 0, 1});
  inst.series = {make_series({3, 3}, "a"), make_series({3, 3}, "b"),
                 make_series({3, 3}, "c")};
  ds.instances.push_back(inst);
  ClusterConfig cfg = small_config(47);
  cfg.k_per_level = {{1, 1}, {2, 1}, {3, 1}};
  auto run = cluster_hts(ds, cfg);
  for (const auto& [level, lm] : run.model.per_level) {
    CHECK(lm.k == 1);
    CHECK(lm.final_loss() == doctest::Approx(0.0));
  }
}

TEST_CASE("two-level alternation recovers separated clusters and terminates") {
  SynthConfig s = small_benchmark({0, 14}, 4, {3}, 53);
  Benchmark b = generate_benchmark(s);
  ClusterConfig cfg = small_config(53);
  auto run = two_level_alternating(b.dataset, 2, 2, cfg);
  const auto& model = run.model;
  CHECK(ari_against(b.labels.at(2), model.per_level.at(2).assignment) >= 0.9);
  CHECK(ari_against(b.labels.at(1), model.per_level.at(1).assignment) >= 0.9);
  check_nonincreasing(model.per_level.at(2).loss_trace);

  // The top trace is monotone between measure rebuilds.
  const auto& top = model.per_level.at(1);
  std::vector<std::size_t> boundaries;
  for (const auto& e : top.events) {
    auto at = e.find("items_rebuilt@");
    if (at != std::string::npos) boundaries.push_back(std::stoul(e.substr(at + 14)));
  }
  std::size_t start = 0;
  for (std::size_t b_idx : boundaries) {
    for (std::size_t i = start + 1; i < b_idx && i < top.loss_trace.size(); ++i)
      CHECK(top.loss_trace[i] <= top.loss_trace[i - 1] + 1e-10);
    start = b_idx;
  }
  for (std::size_t i = start + 1; i < top.loss_trace.size(); ++i)
    CHECK(top.loss_trace[i] <= top.loss_trace[i - 1] + 1e-10);

  CHECK_THROWS_AS(two_level_alternating(HtsDataset{{}, 0}, 2, 2, cfg), DataError);
}

TEST_CASE("levelwise baseline clusters every level independently") {
  SynthConfig s = small_benchmark({0, 16}, 3, {2}, 59);
  Benchmark b = generate_benchmark(s);
  ClusterConfig cfg = small_config(59);
  cfg.k_per_level = {{1, 2}, {2, 2}};
  auto run = cluster_levelwise(b.dataset, cfg);
  CHECK(run.model.mode == ClusterMode::levelwise);
  for (const auto& [level, lm] : run.model.per_level) {
    CHECK(lm.barycenters.empty());
    CHECK(!lm.raw_means.empty());
    check_nonincreasing(lm.loss_trace);
  }
  CHECK(ari_against(b.labels.at(2), run.model.per_level.at(2).assignment) >= 0.9);
}

TEST_CASE("identical seeds give bit-identical models") {
  SynthConfig s = small_benchmark({0, 9, 18}, 2, {2}, 61);
  Benchmark b = generate_benchmark(s);
  ClusterConfig cfg = small_config(777);
  cfg.k_per_level = {{1, 3}, {2, 3}};
  auto run1 = cluster_hts(b.dataset, cfg);
  auto run2 = cluster_hts(b.dataset, cfg);
  CHECK(model_to_json(run1.model) == model_to_json(run2.model));

  ClusterConfig other = cfg;
  other.seed = 778;
  auto run3 = cluster_hts(b.dataset, other);
  // Different seed may still find the same optimum, but the serialized
  // config differs, so files differ.
  CHECK(model_to_json(run1.model) != model_to_json(run3.model));
}

TEST_CASE("instance order does not change recovered structure") {
  SynthConfig s = small_benchmark({0, 20}, 3, {2}, 67);
  Benchmark b = generate_benchmark(s);
  HtsDataset reversed;
  reversed.levels = b.dataset.levels;
  reversed.instances.assign(b.dataset.instances.rbegin(), b.dataset.instances.rend());
  std::vector<int> reversed_truth(b.labels.at(2).rbegin(), b.labels.at(2).rend());

  ClusterConfig cfg = small_config(67);
  cfg.k_per_level = {{1, 2}, {2, 2}};
  auto run1 = cluster_hts(b.dataset, cfg);
  auto run2 = cluster_hts(reversed, cfg);
  CHECK(ari_against(b.labels.at(2), run1.model.per_level.at(2).assignment) ==
        doctest::Approx(1.0));
  CHECK(ari_against(reversed_truth, run2.model.per_level.at(2).assignment) ==
        doctest::Approx(1.0));
}

TEST_CASE("model JSON round trip preserves everything") {
  SynthConfig s = small_benchmark({0, 8}, 2, {2}, 71);
  Benchmark b = generate_benchmark(s);
  ClusterConfig cfg = small_config(71);
  cfg.k_per_level = {{1, 2}, {2, 2}};
  auto run = cluster_hts(b.dataset, cfg);
  std::string text = model_to_json(run.model);
  auto back = model_from_json(text);
  CHECK(model_to_json(back) == text);
  auto a = objective_value(b.dataset, run.model);
  auto b2 = objective_value(b.dataset, back);
  CHECK(a.total == b2.total);
}

TEST_CASE("missing k for a level is rejected") {
  SynthConfig s = small_benchmark({0, 8}, 2, {2}, 73);
  Benchmark b = generate_benchmark(s);
  ClusterConfig cfg = small_config(73);
  cfg.k_per_level = {{2, 2}};  // level 1 missing
  CHECK_THROWS_AS(cluster_hts(b.dataset, cfg), DataError);
}
