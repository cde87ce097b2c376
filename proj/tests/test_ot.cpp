#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "htsc/barycenter.hpp"
#include "htsc/errors.hpp"
#include "htsc/ot.hpp"
#include "htsc/rng.hpp"
#include "oracles.hpp"

using namespace htsc;
using oracle::make_series;

namespace {

std::vector<double> random_simplex(Rng& rng, std::size_t k) {
  std::vector<double> w(k);
  double total = 0.0;
  for (auto& v : w) {
    v = rng.uniform(0.05, 1.0);
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

Matrix random_cost(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (auto& v : m.data) v = rng.uniform(0.0, 1.0);
  return m;
}

double dual_objective(const TransportPlan& plan, const std::vector<double>& a,
                      const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * plan.dual_u[i];
  for (std::size_t j = 0; j < b.size(); ++j) d += b[j] * plan.dual_v[j];
  return d;
}

}  // namespace

TEST_CASE("point mass to point mass") {
  Matrix c(1, 1);
  c(0, 0) = 4.2;
  auto plan = ot_cost({1.0}, {1.0}, c, {});
  CHECK(plan.cost == doctest::Approx(4.2));
  CHECK(plan.plan(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("zero-cost matching is found") {
  Matrix c(2, 2);
  c(0, 0) = 0.0;
  c(0, 1) = 1.0;
  c(1, 0) = 1.0;
  c(1, 1) = 0.0;
  auto plan = ot_cost({0.5, 0.5}, {0.5, 0.5}, c, {});
  CHECK(plan.cost == doctest::Approx(0.0));
  CHECK(plan.plan(0, 0) == doctest::Approx(0.5));
  CHECK(plan.plan(1, 1) == doctest::Approx(0.5));
  CHECK(plan.plan(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("exact solver agrees with spanning-tree enumeration") {
  Rng rng(21);
  for (int rep = 0; rep < 60; ++rep) {
    std::size_t k1 = 1 + rng.index(4), k2 = 1 + rng.index(4);
    auto a = random_simplex(rng, k1);
    auto b = random_simplex(rng, k2);
    auto c = random_cost(rng, k1, k2);
    auto plan = ot_cost(a, b, c, {});
    double want = oracle::ot_cost_enumerated(a, b, c);
    CHECK(std::fabs(plan.cost - want) < 1e-10);
    CHECK(plan.marginal_violation <= 1e-12);
    // Strong duality certificate.
    CHECK(plan.cost - dual_objective(plan, a, b) <= 1e-8);
    CHECK(plan.cost - dual_objective(plan, a, b) >= -1e-8);
  }
}

TEST_CASE("exact solver handles zero-weight atoms and negative dust") {
  Matrix c(3, 2);
  c(0, 0) = -1e-11;  // divergence can carry tiny negative dust
  c(0, 1) = 2.0;
  c(1, 0) = 1.0;
  c(1, 1) = 0.5;
  c(2, 0) = 3.0;
  c(2, 1) = 0.25;
  auto plan = ot_cost({0.5, 0.0, 0.5}, {0.25, 0.75}, c, {});
  CHECK(plan.plan(1, 0) == 0.0);
  CHECK(plan.plan(1, 1) == 0.0);
  CHECK(plan.marginal_violation <= 1e-12);
  double want = oracle::ot_cost_enumerated({0.5, 0.5}, {0.25, 0.75},
                                           [&] {
                                             Matrix sub(2, 2);
                                             sub(0, 0) = c(0, 0);
                                             sub(0, 1) = c(0, 1);
                                             sub(1, 0) = c(2, 0);
                                             sub(1, 1) = c(2, 1);
                                             return sub;
                                           }());
  CHECK(plan.cost == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("sinkhorn stays within 1e-2 of the exact optimum at eps=1e-3") {
  Rng rng(22);
  for (int rep = 0; rep < 8; ++rep) {
    auto a = random_simplex(rng, 5);
    auto b = random_simplex(rng, 5);
    auto c = random_cost(rng, 5, 5);
    OtConfig cfg;
    cfg.epsilon = 1e-3;
    cfg.max_iter = 200000;
    cfg.tol = 1e-9;
    auto entropic = ot_cost(a, b, c, cfg);
    auto exact = ot_cost(a, b, c, {});
    CHECK(std::fabs(entropic.cost - exact.cost) < 1e-2);
    CHECK(entropic.marginal_violation <= 1e-9);
  }
}

TEST_CASE("entropic cost is monotone in the regularization") {
  Rng rng(23);
  auto a = random_simplex(rng, 4);
  auto b = random_simplex(rng, 5);
  auto c = random_cost(rng, 4, 5);
  double prev = -1.0;
  for (double eps : {1e-3, 1e-2, 1e-1}) {
    OtConfig cfg;
    cfg.epsilon = eps;
    cfg.max_iter = 200000;
    cfg.tol = 1e-9;
    double cost = ot_cost(a, b, c, cfg).cost;
    CHECK(cost >= prev - 1e-9);
    prev = cost;
  }
}

TEST_CASE("sinkhorn non-convergence reports the marginal violation") {
  Rng rng(24);
  auto a = random_simplex(rng, 4);
  auto b = random_simplex(rng, 4);
  auto c = random_cost(rng, 4, 4);
  OtConfig cfg;
  cfg.epsilon = 1e-4;
  cfg.max_iter = 1;
  cfg.tol = 1e-14;
  try {
    ot_cost(a, b, c, cfg);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("dimension and mass mismatches are rejected") {
  Matrix c(2, 2, 1.0);
  CHECK_THROWS_AS(ot_cost({1.0}, {0.5, 0.5}, c, {}), DataError);
  CHECK_THROWS_AS(ot_cost({0.7, 0.5}, {0.5, 0.5}, c, {}), DataError);
}

TEST_CASE("ground cost matrix against direct recomputation") {
  AtomRegistry reg;
  SdtwConfig cfg{1.0};
  auto a0 = reg.add(make_series({0}));
  auto a1 = reg.add(make_series({3}));

  auto single = ground_cost_matrix(point_mass(a0), point_mass(a0), reg, cfg);
  CHECK(single(0, 0) == 0.0);
  auto cross = ground_cost_matrix(point_mass(a0), point_mass(a1), reg, cfg);
  CHECK(cross(0, 0) == doctest::Approx(9.0));

  Rng rng(25);
  std::vector<std::size_t> pa, qa;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> v(5);
    for (auto& x : v) x = rng.uniform(-1, 1);
    pa.push_back(reg.add(make_series(v)));
  }
  for (int i = 0; i < 3; ++i) {
    std::vector<double> v(4);
    for (auto& x : v) x = rng.uniform(-1, 1);
    qa.push_back(reg.add(make_series(v)));
  }
  DiscreteMeasure P{pa, {0.2, 0.3, 0.5}};
  DiscreteMeasure Q{qa, {0.5, 0.25, 0.25}};
  auto g = ground_cost_matrix(P, Q, reg, cfg);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(g(i, j) ==
            doctest::Approx(sdtw_divergence(reg.atom(pa[i]), reg.atom(qa[j]), cfg))
                .epsilon(1e-12));
  CHECK(reg.cache_entries() > 0);
}

TEST_CASE("w_sdtw identities") {
  AtomRegistry reg;
  SdtwConfig scfg{1.0};
  OtConfig ocfg;
  auto a0 = reg.add(make_series({0, 1, 2}));
  auto a1 = reg.add(make_series({5, 5, 5}));
  auto a2 = reg.add(make_series({-2, 0, 2}));

  DiscreteMeasure P{{a0, a1}, {0.25, 0.75}};
  CHECK(w_sdtw(P, P, reg, scfg, ocfg) == doctest::Approx(0.0));

  double d = sdtw_divergence(reg.atom(a0), reg.atom(a1), scfg);
  CHECK(w_sdtw(point_mass(a0), point_mass(a1), reg, scfg, ocfg) == doctest::Approx(d));

  DiscreteMeasure Q{{a0, a1, a2}, {0.2, 0.2, 0.6}};
  DiscreteMeasure R{{a1, a2, a0}, {0.5, 0.3, 0.2}};
  auto ground = ground_cost_matrix(Q, R, reg, scfg);
  double want = oracle::ot_cost_enumerated(Q.weights, R.weights, ground);
  CHECK(w_sdtw(Q, R, reg, scfg, ocfg) == doctest::Approx(want).epsilon(1e-10));
  CHECK(w_sdtw(Q, R, reg, scfg, ocfg) ==
        doctest::Approx(w_sdtw(R, Q, reg, scfg, ocfg)).epsilon(1e-9));
}

TEST_CASE("second-order transport reduces to w_sdtw on point masses") {
  AtomRegistry reg;
  SdtwConfig scfg{1.0};
  OtConfig ocfg;
  auto a0 = reg.add(make_series({0, 0, 0}));
  auto a1 = reg.add(make_series({4, 4, 4}));
  DiscreteMeasure P{{a0}, {1.0}};
  DiscreteMeasure Q{{a1}, {1.0}};
  double inner = w_sdtw(P, Q, reg, scfg, ocfg);
  double outer = w_sdtw_level2({P}, {1.0}, {Q}, {1.0}, reg, scfg, ocfg);
  CHECK(outer == doctest::Approx(inner).epsilon(1e-10));
}

TEST_CASE("barycenter fixed points") {
  AtomRegistry reg;
  SdtwConfig scfg{1.0};
  OtConfig ocfg;
  MeanConfig mcfg;
  BarycenterConfig bcfg;
  Rng rng(26);

  auto a0 = reg.add(make_series({0, 1, 2, 3}));
  auto a1 = reg.add(make_series({5, 4, 3, 2}));
  DiscreteMeasure P{{a0, a1}, {0.3, 0.7}};

  SUBCASE("single input measure returns itself") {
    auto res = free_support_barycenter({P}, {1.0}, 2, reg, scfg, ocfg, mcfg, bcfg, rng);
    CHECK(res.measure.atoms == P.atoms);
    CHECK(res.measure.weights == P.weights);
    CHECK(res.objective_trace.back() == doctest::Approx(0.0));
  }

  SUBCASE("identical inputs return the shared measure") {
    auto res = free_support_barycenter({P, P}, {0.5, 0.5}, 2, reg, scfg, ocfg, mcfg,
                                       bcfg, rng);
    CHECK(res.measure.atoms == P.atoms);
    double w = w_sdtw(res.measure, P, reg, scfg, ocfg);
    CHECK(w == doctest::Approx(0.0));
  }
}

TEST_CASE("barycenter objective trace is nonincreasing") {
  AtomRegistry reg;
  SdtwConfig scfg{1.0};
  OtConfig ocfg;
  MeanConfig mcfg;
  BarycenterConfig bcfg;
  Rng rng(27);

  std::vector<DiscreteMeasure> inputs;
  Rng data_rng(28);
  for (int m = 0; m < 3; ++m) {
    std::vector<std::size_t> atoms;
    for (int a = 0; a < 2; ++a) {
      std::vector<double> v(6);
      for (auto& x : v) x = data_rng.uniform(-2, 2);
      atoms.push_back(reg.add(make_series(v)));
    }
    inputs.push_back({atoms, {0.5, 0.5}});
  }
  auto res = free_support_barycenter(inputs, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 2, reg, scfg,
                                     ocfg, mcfg, bcfg, rng);
  REQUIRE(!res.objective_trace.empty());
  for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
    CHECK(res.objective_trace[i] <= res.objective_trace[i - 1] + 1e-10);
  CHECK(res.objective_trace.back() <= res.objective_trace.front() + 1e-10);

  SUBCASE("oversized support is clamped") {
    auto clamped = free_support_barycenter(inputs, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 50, reg,
                                           scfg, ocfg, mcfg, bcfg, rng);
    CHECK(clamped.clamped);
    CHECK(clamped.measure.size() <= 6);
  }
}

TEST_CASE("measure validation") {
  AtomRegistry reg;
  auto a0 = reg.add(make_series({1}));
  auto a1 = reg.add(make_series({2}));
  CHECK(validate_measure({{a0, a1}, {0.5, 0.5}}).ok);
  CHECK(!validate_measure({{a0, a1}, {0.6, 0.6}}).ok);
  CHECK(!validate_measure({{a0, a0}, {0.5, 0.5}}).ok);
  CHECK(!validate_measure({{}, {}}).ok);
  CHECK(!validate_measure({{a0, a1}, {1.5, -0.5}}).ok);
}
