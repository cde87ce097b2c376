#include "htsc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "htsc/errors.hpp"

namespace htsc::metrics {

namespace {

std::vector<int> densify(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out[i] = remap.emplace(labels[i], static_cast<int>(remap.size())).first->second;
  return out;
}

double entropy(const std::vector<long long>& totals, long long n) {
  double h = 0.0;
  for (long long c : totals) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log(p);
  }
  return h;
}

double mutual_information(const Contingency& ct) {
  double mi = 0.0;
  const double n = static_cast<double>(ct.n);
  for (std::size_t i = 0; i < ct.counts.size(); ++i) {
    for (std::size_t j = 0; j < ct.counts[i].size(); ++j) {
      long long nij = ct.counts[i][j];
      if (nij == 0) continue;
      double pij = static_cast<double>(nij) / n;
      mi += pij * std::log(n * static_cast<double>(nij) /
                           (static_cast<double>(ct.row_totals[i]) *
                            static_cast<double>(ct.col_totals[j])));
    }
  }
  return std::max(0.0, mi);
}

/// Expected MI under the hypergeometric (fixed margins) model, via the
/// exact sum over feasible cell counts with log-gamma factorials.
double expected_mutual_information(const Contingency& ct) {
  const long long n = ct.n;
  const double logn = std::log(static_cast<double>(n));
  auto lf = [](long long k) { return std::lgamma(static_cast<double>(k) + 1.0); };
  double emi = 0.0;
  for (long long ai : ct.row_totals) {
    for (long long bj : ct.col_totals) {
      const long long lo = std::max<long long>(1, ai + bj - n);
      const long long hi = std::min(ai, bj);
      for (long long nij = lo; nij <= hi; ++nij) {
        double term = (static_cast<double>(nij) / static_cast<double>(n)) *
                      (logn + std::log(static_cast<double>(nij)) -
                       std::log(static_cast<double>(ai)) -
                       std::log(static_cast<double>(bj)));
        double logp = lf(ai) + lf(bj) + lf(n - ai) + lf(n - bj) - lf(n) -
                      lf(nij) - lf(ai - nij) - lf(bj - nij) -
                      lf(n - ai - bj + nij);
        emi += term * std::exp(logp);
      }
    }
  }
  return emi;
}

bool trivial(const Contingency& ct, bool rows) {
  const auto& totals = rows ? ct.row_totals : ct.col_totals;
  int nonzero = 0;
  for (long long c : totals)
    if (c > 0) ++nonzero;
  return nonzero <= 1;
}

}  // namespace

Contingency contingency(const Partition& a, const Partition& b) {
  if (a.item_count() != b.item_count())
    throw DataError("contingency: partitions cover different item sets");
  if (a.item_count() == 0) throw DataError("contingency: empty partitions");
  auto la = densify(a.labels);
  auto lb = densify(b.labels);
  int ka = *std::max_element(la.begin(), la.end()) + 1;
  int kb = *std::max_element(lb.begin(), lb.end()) + 1;
  Contingency ct;
  ct.n = static_cast<long long>(la.size());
  ct.counts.assign(ka, std::vector<long long>(kb, 0));
  ct.row_totals.assign(ka, 0);
  ct.col_totals.assign(kb, 0);
  for (std::size_t i = 0; i < la.size(); ++i) {
    ++ct.counts[la[i]][lb[i]];
    ++ct.row_totals[la[i]];
    ++ct.col_totals[lb[i]];
  }
  return ct;
}

double nmi(const Partition& a, const Partition& b) {
  Contingency ct = contingency(a, b);
  bool ta = trivial(ct, true), tb = trivial(ct, false);
  if (ta && tb) return 1.0;
  if (ta || tb) return 0.0;
  double ha = entropy(ct.row_totals, ct.n);
  double hb = entropy(ct.col_totals, ct.n);
  return mutual_information(ct) / std::sqrt(ha * hb);
}

double ami(const Partition& a, const Partition& b) {
  Contingency ct = contingency(a, b);
  bool ta = trivial(ct, true), tb = trivial(ct, false);
  if (ta && tb) return 1.0;
  double ha = entropy(ct.row_totals, ct.n);
  double hb = entropy(ct.col_totals, ct.n);
  double mi = mutual_information(ct);
  double emi = expected_mutual_information(ct);
  double denom = std::max(ha, hb) - emi;
  if (std::fabs(denom) < 1e-15) return mi > emi ? 1.0 : 0.0;
  return (mi - emi) / denom;
}

double ari(const Partition& a, const Partition& b) {
  Contingency ct = contingency(a, b);
  auto choose2 = [](long long k) {
    return 0.5 * static_cast<double>(k) * static_cast<double>(k - 1);
  };
  double idx = 0.0;
  for (const auto& row : ct.counts)
    for (long long nij : row) idx += choose2(nij);
  double ra = 0.0, rb = 0.0;
  for (long long c : ct.row_totals) ra += choose2(c);
  for (long long c : ct.col_totals) rb += choose2(c);
  double total = choose2(ct.n);
  double expected = total > 0.0 ? ra * rb / total : 0.0;
  double max_idx = 0.5 * (ra + rb);
  double denom = max_idx - expected;
  if (std::fabs(denom) < 1e-15) return 1.0;  // both trivial or both singleton
  return (idx - expected) / denom;
}

}  // namespace htsc::metrics
