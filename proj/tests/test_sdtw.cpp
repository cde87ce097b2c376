#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "htsc/rng.hpp"
#include "htsc/sdtw.hpp"
#include "htsc/sdtw_mean.hpp"
#include "oracles.hpp"

using namespace htsc;
using oracle::make_series;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -2.0,
                                  double hi = 2.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

double rel_err(double got, double want) {
  return std::fabs(got - want) / std::max(1.0, std::fabs(want));
}

}  // namespace

TEST_CASE("cost matrix entries are squared differences") {
  auto c = cost_matrix(make_series({0}), make_series({3}));
  CHECK(c.entries.rows == 1);
  CHECK(c.entries(0, 0) == doctest::Approx(9.0));

  auto c2 = cost_matrix(make_series({1, 2}), make_series({1, 2}));
  CHECK(c2.entries(0, 0) == 0.0);
  CHECK(c2.entries(0, 1) == 1.0);
  CHECK(c2.entries(1, 0) == 1.0);
  CHECK(c2.entries(1, 1) == 0.0);

  auto c3 = cost_matrix(make_series({-1, 0, 4}), make_series({-1, 0, 4}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(c3.entries(i, i) == 0.0);
}

TEST_CASE("single-cell soft-DTW is the single alignment cost") {
  for (double gamma : {1e-3, 0.1, 1.0, 10.0}) {
    CHECK(soft_dtw(make_series({0}), make_series({3}), {gamma}) ==
          doctest::Approx(9.0).epsilon(1e-12));
  }
}

TEST_CASE("small gamma approaches hard DTW from below") {
  auto x = make_series({0, 1, 2});
  auto y = make_series({0, 1, 2});
  double v = soft_dtw(x, y, {1e-3});
  double hard = oracle::hard_dtw_enumerated(x.values, y.values);
  CHECK(hard == doctest::Approx(0.0));
  CHECK(v <= hard + 1e-15);
  CHECK(std::fabs(v - hard) < 1e-6);
}

TEST_CASE("matches the alignment-set enumeration") {
  CHECK(rel_err(soft_dtw(make_series({1, 2, 3}), make_series({2, 2, 2}), {1.0}),
                oracle::soft_dtw_enumerated({1, 2, 3}, {2, 2, 2}, 1.0)) < 1e-8);

  Rng rng(11);
  for (int rep = 0; rep < 60; ++rep) {
    std::size_t t1 = 1 + rng.index(6), t2 = 1 + rng.index(6);
    auto x = random_values(rng, t1);
    auto y = random_values(rng, t2);
    for (double gamma : {0.1, 1.0}) {
      double got = soft_dtw(make_series(x), make_series(y), {gamma});
      double want = oracle::soft_dtw_enumerated(x, y, gamma);
      CHECK(rel_err(got, want) < 1e-8);
    }
  }
}

TEST_CASE("soft-min lower-bounds hard DTW with the log-count gap") {
  Rng rng(12);
  for (int rep = 0; rep < 40; ++rep) {
    auto x = random_values(rng, 2 + rng.index(4));
    auto y = random_values(rng, 2 + rng.index(4));
    double gamma = rng.uniform(0.05, 5.0);
    auto costs = oracle::alignment_costs(x, y);
    double hard = *std::min_element(costs.begin(), costs.end());
    double soft = soft_dtw(make_series(x), make_series(y), {gamma});
    CHECK(soft <= hard + 1e-12);
    CHECK(hard - soft <= gamma * std::log(static_cast<double>(costs.size())) + 1e-9);
  }
}

TEST_CASE("gradient chain rule on the single-cell case") {
  auto g = soft_dtw_grad(make_series({0}), make_series({3}), {1.0});
  CHECK(g.value == doctest::Approx(9.0));
  REQUIRE(g.grad.size() == 1);
  CHECK(g.grad[0] == doctest::Approx(-6.0));
}

TEST_CASE("gradients agree with central finite differences") {
  Rng rng(13);
  for (double gamma : {0.1, 1.0, 10.0}) {
    for (int rep = 0; rep < 8; ++rep) {
      auto xv = random_values(rng, 2 + rng.index(11));
      auto yv = random_values(rng, 2 + rng.index(11));
      auto got = soft_dtw_grad(make_series(xv), make_series(yv), {gamma});
      auto fd = oracle::central_diff(
          [&](const std::vector<double>& x) {
            return soft_dtw(make_series(x), make_series(yv), {gamma});
          },
          xv);
      for (std::size_t i = 0; i < xv.size(); ++i)
        CHECK(std::fabs(got.grad[i] - fd[i]) <=
              1e-4 * std::max(1.0, std::fabs(fd[i])));
    }
  }
}

TEST_CASE("self-gradient is generally nonzero (no minimum at equality)") {
  auto x = make_series({0.3, -1.2, 0.8, 2.0, -0.4, 1.1, 0.0, 0.9});
  auto got = sdtw_divergence_grad(x, x, {1.0});
  CHECK(got.value == 0.0);
  auto fd = oracle::central_diff(
      [&](const std::vector<double>& v) {
        return sdtw_divergence(make_series(v), x, {1.0});
      },
      x.values);
  for (std::size_t i = 0; i < x.length(); ++i)
    CHECK(std::fabs(got.grad[i] - fd[i]) <= 1e-4 * std::max(1.0, std::fabs(fd[i])));

  // The raw soft-DTW self value is not a minimum at equality, so its own
  // gradient need not vanish; check it against finite differences too.
  auto raw = soft_dtw_grad(x, x, {1.0});
  auto raw_fd = oracle::central_diff(
      [&](const std::vector<double>& v) {
        return soft_dtw(make_series(v), x, {1.0});
      },
      x.values);
  for (std::size_t i = 0; i < x.length(); ++i)
    CHECK(std::fabs(raw.grad[i] - raw_fd[i]) <= 1e-4 * std::max(1.0, std::fabs(raw_fd[i])));
}

TEST_CASE("divergence identities and the enumeration oracle") {
  CHECK(sdtw_divergence(make_series({0}), make_series({3}), {1.0}) ==
        doctest::Approx(9.0).epsilon(1e-12));

  Rng rng(14);
  for (int rep = 0; rep < 50; ++rep) {
    auto xv = random_values(rng, 1 + rng.index(10));
    CHECK(sdtw_divergence(make_series(xv), make_series(xv), {0.7}) == 0.0);
  }

  double got = sdtw_divergence(make_series({1, 2, 3, 4}), make_series({4, 3, 2, 1}), {0.5});
  double want = oracle::divergence_enumerated({1, 2, 3, 4}, {4, 3, 2, 1}, 0.5);
  CHECK(rel_err(got, want) < 1e-8);

  for (int rep = 0; rep < 40; ++rep) {
    auto xv = random_values(rng, 2 + rng.index(8));
    auto yv = random_values(rng, 2 + rng.index(8));
    double d1 = sdtw_divergence(make_series(xv), make_series(yv), {1.0});
    double d2 = sdtw_divergence(make_series(yv), make_series(xv), {1.0});
    CHECK(std::fabs(d1 - d2) <= 1e-12 * std::max(1.0, std::fabs(d1)));
    CHECK(d1 >= -1e-10);
  }
}

TEST_CASE("divergence gradient at identical inputs and random pairs") {
  auto g0 = sdtw_divergence_grad(make_series({0}), make_series({3}), {1.0});
  REQUIRE(g0.grad.size() == 1);
  CHECK(g0.grad[0] == doctest::Approx(-6.0));

  Rng rng(15);
  for (int rep = 0; rep < 10; ++rep) {
    auto xv = random_values(rng, 10);
    auto yv = random_values(rng, 10);
    auto got = sdtw_divergence_grad(make_series(xv), make_series(yv), {1.0});
    auto fd = oracle::central_diff(
        [&](const std::vector<double>& v) {
          return sdtw_divergence(make_series(v), make_series(yv), {1.0});
        },
        xv);
    for (std::size_t i = 0; i < xv.size(); ++i)
      CHECK(std::fabs(got.grad[i] - fd[i]) <= 1e-4 * std::max(1.0, std::fabs(fd[i])));
  }
}

TEST_CASE("gradient with respect to the second argument") {
  Rng rng(16);
  auto xv = random_values(rng, 7);
  auto yv = random_values(rng, 9);
  auto got = sdtw_divergence_grad_y(make_series(xv), make_series(yv), {1.0});
  auto fd = oracle::central_diff(
      [&](const std::vector<double>& v) {
        return sdtw_divergence(make_series(xv), make_series(v), {1.0});
      },
      yv);
  for (std::size_t j = 0; j < yv.size(); ++j)
    CHECK(std::fabs(got.grad[j] - fd[j]) <= 1e-4 * std::max(1.0, std::fabs(fd[j])));
}

TEST_CASE("a wide band reproduces the unconstrained value") {
  Rng rng(17);
  auto xv = random_values(rng, 9);
  auto yv = random_values(rng, 6);
  SdtwConfig plain{1.0, std::nullopt};
  SdtwConfig banded{1.0, 32};
  CHECK(soft_dtw(make_series(xv), make_series(yv), banded) ==
        doctest::Approx(soft_dtw(make_series(xv), make_series(yv), plain)));

  SdtwConfig narrow{1.0, 1};
  double constrained = soft_dtw(make_series(xv), make_series(yv), narrow);
  CHECK(std::isfinite(constrained));
  CHECK(constrained >= soft_dtw(make_series(xv), make_series(yv), plain) - 1e-12);
  auto g = soft_dtw_grad(make_series(xv), make_series(yv), narrow);
  auto fd = oracle::central_diff(
      [&](const std::vector<double>& v) {
        return soft_dtw(make_series(v), make_series(yv), narrow);
      },
      xv);
  for (std::size_t i = 0; i < xv.size(); ++i)
    CHECK(std::fabs(g.grad[i] - fd[i]) <= 1e-4 * std::max(1.0, std::fabs(fd[i])));
}

TEST_CASE("mean of a singleton initialized at the member stays there") {
  auto x = make_series({1.0, 2.0, 0.5, -1.0});
  auto res = sdtw_mean({&x}, x, {1.0}, {});
  CHECK(res.mean.values == x.values);
  CHECK(res.trace.front() == 0.0);
  CHECK(res.trace.back() == 0.0);
}

TEST_CASE("mean of identical members initialized at the member stays there") {
  auto x = make_series({0.0, 1.0, 4.0});
  auto y = x;
  auto res = sdtw_mean({&x, &y}, x, {1.0}, {});
  CHECK(res.mean.values == x.values);
  CHECK(res.trace.back() == doctest::Approx(0.0));
}

TEST_CASE("mean descends from the elementwise average of noisy ramps") {
  Rng rng(18);
  std::vector<TimeSeries> members;
  const std::size_t T = 24;
  for (int r = 0; r < 5; ++r) {
    std::vector<double> v(T);
    for (std::size_t t = 0; t < T; ++t)
      v[t] = std::sin(0.4 * static_cast<double>(t)) + 0.1 * static_cast<double>(t) +
             0.3 * rng.normal();
    members.push_back(make_series(std::move(v)));
  }
  std::vector<const TimeSeries*> ptrs;
  for (auto& m : members) ptrs.push_back(&m);
  TimeSeries init;
  init.values.assign(T, 0.0);
  for (const auto& m : members)
    for (std::size_t t = 0; t < T; ++t) init.values[t] += m.values[t] / 5.0;

  auto res = sdtw_mean(ptrs, init, {1.0}, {});
  CHECK(res.trace.back() < res.trace.front());
  for (std::size_t i = 1; i < res.trace.size(); ++i)
    CHECK(res.trace[i] <= res.trace[i - 1] + 1e-12);
}

TEST_CASE("mean init picker honors the median-length rule") {
  auto a = make_series({1, 2}, "a");
  auto b = make_series({1, 2, 3, 4}, "b");
  auto c = make_series({1, 2, 3, 4, 5, 6, 7, 8, 9}, "c");
  Rng rng(19);
  std::size_t pick = choose_mean_init({&a, &b, &c}, {1.0}, rng);
  CHECK(pick == 1);  // median length 4 -> the length-4 member
}
