#include "htsc/sdtw.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace htsc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double sq(double v) { return v * v; }

/// exp for nonpositive arguments, ~1e-13 relative accuracy, branch-free.
/// The DP spends nearly all its time in exp/log; a range-reduced polynomial
/// with no data-dependent branches lets independent diagonal cells overlap
/// in the pipeline. Inputs below -708 (including -inf) clamp to ~5e-308.
inline double fast_exp(double x) {
  x = x < -708.0 ? -708.0 : x;  // cmov; also sanitizes -inf
  constexpr double kMagic = 6755399441055744.0;  // 1.5 * 2^52
  double t = x * 1.4426950408889634074 + kMagic;
  std::uint64_t tb;
  std::memcpy(&tb, &t, sizeof tb);
  long long k = static_cast<std::int32_t>(tb & 0xffffffffu);
  double kd = t - kMagic;
  double r = x - kd * 0.69314718055994530942;
  r -= kd * 2.3190468138462995584e-17;
  double p = 1.0 +
             r * (1.0 +
                  r * (0.5 +
                       r * (1.6666666666666666667e-1 +
                            r * (4.1666666666666666667e-2 +
                                 r * (8.3333333333333333333e-3 +
                                      r * (1.3888888888888888889e-3 +
                                           r * (1.9841269841269841270e-4 +
                                                r * (2.4801587301587301587e-5 +
                                                     r * (2.7557319223985890653e-6 +
                                                          r * (2.7557319223985890653e-7 +
                                                               r * 2.5052108385441718775e-8))))))))));
  std::uint64_t sb = static_cast<std::uint64_t>(1023 + k) << 52;
  double scale;
  std::memcpy(&scale, &sb, sizeof scale);
  return p * scale;
}

/// log for positive finite arguments, ~1e-14 relative accuracy, branch-free.
inline double fast_log(double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  long long e = static_cast<long long>((bits >> 52) & 0x7ff) - 1022;
  bits = (bits & 0xfffffffffffffULL) | (0x3feULL << 52);  // mantissa in [0.5, 1)
  double f;
  std::memcpy(&f, &bits, sizeof f);
  bool low = f < 0.70710678118654752440;
  f = low ? f * 2.0 : f;
  e = low ? e - 1 : e;
  double z = (f - 1.0) / (f + 1.0);
  double z2 = z * z;
  double p = 2.0 * z *
             (1.0 +
              z2 * (3.3333333333333333333e-1 +
                    z2 * (2.0e-1 +
                          z2 * (1.4285714285714285714e-1 +
                                z2 * (1.1111111111111111111e-1 +
                                      z2 * (9.0909090909090909091e-2 +
                                            z2 * (7.6923076923076923077e-2 +
                                                  z2 * 6.6666666666666666667e-2)))))));
  return p + static_cast<double>(e) * 0.69314718055994530942;
}

/// Soft-min of three values at temperature gamma, max-shifted so small
/// gamma cannot underflow. Fully branch-free: unreachable cells (all three
/// arguments infinite) poison the intermediate with NaN and are blended
/// back to +inf at the end, which keeps the loop auto-vectorizable.
inline double softmin3(double a, double b, double c, double inv_gamma, double gamma) {
  double m = std::min(std::min(a, b), c);
  double s = fast_exp((m - a) * inv_gamma) + fast_exp((m - b) * inv_gamma) +
             fast_exp((m - c) * inv_gamma);
  double r = m - gamma * fast_log(s);
  return m == kInf ? kInf : r;
}

struct Band {
  bool active = false;
  int width = 0;

  // i, j are 1-based DP indices.
  bool banned(int i, int j) const { return active && std::abs(i - j) > width; }
};

Band make_band(const SdtwConfig& cfg, int n, int m) {
  Band b;
  if (cfg.band) {
    b.active = true;
    // Widen so the corner-to-corner path stays feasible.
    b.width = std::max(*cfg.band, std::abs(n - m));
  }
  return b;
}

thread_local std::vector<double> tls_row_prev, tls_row_cur, tls_diag_cur, tls_R, tls_E;

/// Anti-diagonal sweep: cells on one diagonal have no data dependencies, so
/// their exp/log chains overlap in the pipeline (the row-wise recursion is
/// latency-bound on a single core). Buffers are indexed by the row i with a
/// +1 shift; diag[d][i] holds R at (i, d - i).
double value_only(const double* x, int n, const double* y, int m, const SdtwConfig& cfg) {
  const double gamma = cfg.gamma;
  const Band band = make_band(cfg, n, m);
  const double inv_gamma = 1.0 / gamma;
  auto& d2 = tls_row_prev;   // diagonal d-2
  auto& d1 = tls_row_cur;    // diagonal d-1
  auto& d0 = tls_diag_cur;   // diagonal being built
  d2.assign(n + 2, kInf);
  d1.assign(n + 2, kInf);
  d0.assign(n + 2, kInf);
  d2[0] = 0.0;  // R(0,0); slot [i] stores row i (0-based DP row index i)
  double result = kInf;
  for (int d = 2; d <= n + m; ++d) {
    const int lo = std::max(1, d - m);
    const int hi = std::min(n, d - 1);
    // Later diagonals only read slots [lo-1, hi+1]; writing the two edge
    // sentinels (and every interior slot below) keeps the buffers clean
    // without an O(n) clear per diagonal.
    d0[lo - 1] = kInf;
    d0[hi + 1] = kInf;
    for (int i = lo; i <= hi; ++i) {
      if (band.banned(i, d - i)) {
        d0[i] = kInf;
        continue;
      }
      // up = (i-1, j) on d-1 slot [i-1]; left = (i, j-1) on d-1 slot [i];
      // diag = (i-1, j-1) on d-2 slot [i-1].
      d0[i] = sq(x[i - 1] - y[d - i - 1]) +
              softmin3(d1[i - 1], d2[i - 1], d1[i], inv_gamma, gamma);
    }
    if (d == n + m) result = d0[n];
    std::swap(d2, d1);
    std::swap(d1, d0);
  }
  return result;
}

/// Forward + backward pass; fills E ((n+2) x (m+2), row-major) with the
/// expected alignment matrix and returns the soft-DTW value.
double alignment_expectation(const double* x, int n, const double* y, int m,
                             const SdtwConfig& cfg, std::vector<double>& E) {
  const double gamma = cfg.gamma;
  const double inv_gamma = 1.0 / gamma;
  const Band band = make_band(cfg, n, m);
  const int W = m + 2;
  auto& R = tls_R;
  R.assign(static_cast<std::size_t>(n + 2) * W, kInf);
  R[0] = 0.0;
  for (int i = 1; i <= n; ++i) {
    double* Ri = &R[static_cast<std::size_t>(i) * W];
    const double* Rp = Ri - W;
    const double xi = x[i - 1];
    for (int j = 1; j <= m; ++j) {
      if (band.banned(i, j)) continue;  // stays +inf
      Ri[j] = sq(xi - y[j - 1]) +
              softmin3(Rp[j], Rp[j - 1], Ri[j - 1], inv_gamma, gamma);
    }
  }
  const double value = R[static_cast<std::size_t>(n) * W + m];

  E.assign(static_cast<std::size_t>(n + 2) * W, 0.0);
  E[static_cast<std::size_t>(n + 1) * W + (m + 1)] = 1.0;
  // Pad row/column so the terminal cell feeds E[n][m] with weight one.
  R[static_cast<std::size_t>(n + 1) * W + (m + 1)] = value;
  for (int i = 1; i <= n; ++i) R[static_cast<std::size_t>(i) * W + (m + 1)] = -kInf;
  for (int j = 1; j <= m; ++j) R[static_cast<std::size_t>(n + 1) * W + j] = -kInf;

  auto cost_pad = [&](int i, int j) -> double {
    if (i <= n && j <= m) return sq(x[i - 1] - y[j - 1]);
    return 0.0;
  };
  // Banned interior cells hold R = +inf and must not feed the recursion;
  // pad cells are safe (their -inf R or zero E cancels the contribution).
  auto admissible = [&](int i, int j) -> bool {
    return i > n || j > m || !band.banned(i, j);
  };

  for (int j = m; j >= 1; --j) {
    for (int i = n; i >= 1; --i) {
      if (band.banned(i, j)) continue;
      const double rij = R[static_cast<std::size_t>(i) * W + j];
      double e = 0.0;
      if (admissible(i + 1, j)) {
        e += E[static_cast<std::size_t>(i + 1) * W + j] *
             fast_exp((R[static_cast<std::size_t>(i + 1) * W + j] - rij - cost_pad(i + 1, j)) * inv_gamma);
      }
      if (admissible(i, j + 1)) {
        e += E[static_cast<std::size_t>(i) * W + (j + 1)] *
             fast_exp((R[static_cast<std::size_t>(i) * W + (j + 1)] - rij - cost_pad(i, j + 1)) * inv_gamma);
      }
      if (admissible(i + 1, j + 1)) {
        e += E[static_cast<std::size_t>(i + 1) * W + (j + 1)] *
             fast_exp((R[static_cast<std::size_t>(i + 1) * W + (j + 1)] - rij - cost_pad(i + 1, j + 1)) * inv_gamma);
      }
      E[static_cast<std::size_t>(i) * W + j] = e;
    }
  }
  return value;
}

void require_valid(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg) {
  if (x.values.empty() || y.values.empty())
    throw std::invalid_argument("soft_dtw: series must be non-empty");
  if (!(cfg.gamma > 0.0)) throw std::invalid_argument("soft_dtw: gamma must be positive");
}

}  // namespace

CostMatrix cost_matrix(const TimeSeries& x, const TimeSeries& y) {
  CostMatrix c;
  c.entries = Matrix(x.length(), y.length());
  for (std::size_t i = 0; i < x.length(); ++i)
    for (std::size_t j = 0; j < y.length(); ++j)
      c.entries(i, j) = sq(x.values[i] - y.values[j]);
  return c;
}

double soft_dtw(const CostMatrix& c, const SdtwConfig& cfg) {
  if (!(cfg.gamma > 0.0)) throw std::invalid_argument("soft_dtw: gamma must be positive");
  const int n = static_cast<int>(c.entries.rows);
  const int m = static_cast<int>(c.entries.cols);
  if (n == 0 || m == 0) throw std::invalid_argument("soft_dtw: empty cost matrix");
  const double gamma = cfg.gamma;
  const double inv_gamma = 1.0 / gamma;
  const Band band = make_band(cfg, n, m);
  auto& prev = tls_row_prev;
  auto& cur = tls_row_cur;
  prev.assign(m + 1, kInf);
  cur.assign(m + 1, kInf);
  prev[0] = 0.0;
  for (int i = 1; i <= n; ++i) {
    cur[0] = kInf;
    for (int j = 1; j <= m; ++j) {
      cur[j] = band.banned(i, j)
                   ? kInf
                   : c.entries(i - 1, j - 1) +
                         softmin3(prev[j], prev[j - 1], cur[j - 1], inv_gamma, gamma);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double soft_dtw(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg) {
  require_valid(x, y, cfg);
  return value_only(x.values.data(), static_cast<int>(x.length()), y.values.data(),
                    static_cast<int>(y.length()), cfg);
}

ValueGrad soft_dtw_grad(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg) {
  require_valid(x, y, cfg);
  const int n = static_cast<int>(x.length());
  const int m = static_cast<int>(y.length());
  const int W = m + 2;
  ValueGrad out;
  out.value = alignment_expectation(x.values.data(), n, y.values.data(), m, cfg, tls_E);
  out.grad.assign(n, 0.0);
  for (int i = 1; i <= n; ++i) {
    double g = 0.0;
    for (int j = 1; j <= m; ++j)
      g += tls_E[static_cast<std::size_t>(i) * W + j] * 2.0 * (x.values[i - 1] - y.values[j - 1]);
    out.grad[i - 1] = g;
  }
  return out;
}

ValueGrad soft_dtw_grad_y(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg) {
  require_valid(x, y, cfg);
  const int n = static_cast<int>(x.length());
  const int m = static_cast<int>(y.length());
  const int W = m + 2;
  ValueGrad out;
  out.value = alignment_expectation(x.values.data(), n, y.values.data(), m, cfg, tls_E);
  out.grad.assign(m, 0.0);
  for (int j = 1; j <= m; ++j) {
    double g = 0.0;
    for (int i = 1; i <= n; ++i)
      g += tls_E[static_cast<std::size_t>(i) * W + j] * 2.0 * (y.values[j - 1] - x.values[i - 1]);
    out.grad[j - 1] = g;
  }
  return out;
}

ValueGrad soft_dtw_self_grad(const TimeSeries& x, const SdtwConfig& cfg) {
  require_valid(x, x, cfg);
  const int n = static_cast<int>(x.length());
  const int W = n + 2;
  ValueGrad out;
  out.value = alignment_expectation(x.values.data(), n, x.values.data(), n, cfg, tls_E);
  out.grad.assign(n, 0.0);
  // Both cost slots hold x, so cell (i, j) contributes through row and
  // column alike.
  for (int k = 1; k <= n; ++k) {
    double g = 0.0;
    for (int j = 1; j <= n; ++j) {
      double e = tls_E[static_cast<std::size_t>(k) * W + j] +
                 tls_E[static_cast<std::size_t>(j) * W + k];
      g += e * 2.0 * (x.values[k - 1] - x.values[j - 1]);
    }
    out.grad[k - 1] = g;
  }
  return out;
}

double sdtw_divergence_from_terms(double sdtw_xy, double self_xx, double self_yy) {
  return (sdtw_xy - 0.5 * self_xx) - 0.5 * self_yy;
}

double sdtw_divergence(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg) {
  require_valid(x, y, cfg);
  const double sxy = soft_dtw(x, y, cfg);
  const double sxx = soft_dtw(x, x, cfg);
  const double syy = soft_dtw(y, y, cfg);
  return sdtw_divergence_from_terms(sxy, sxx, syy);
}

ValueGrad sdtw_divergence_grad(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg) {
  ValueGrad cross = soft_dtw_grad(x, y, cfg);
  ValueGrad self = soft_dtw_self_grad(x, cfg);
  const double self_yy = soft_dtw(y, y, cfg);
  ValueGrad out;
  out.value = sdtw_divergence_from_terms(cross.value, self.value, self_yy);
  out.grad.resize(x.length());
  for (std::size_t i = 0; i < x.length(); ++i)
    out.grad[i] = cross.grad[i] - 0.5 * self.grad[i];
  return out;
}

ValueGrad sdtw_divergence_grad_y(const TimeSeries& x, const TimeSeries& y, const SdtwConfig& cfg) {
  ValueGrad cross = soft_dtw_grad_y(x, y, cfg);
  ValueGrad self = soft_dtw_self_grad(y, cfg);
  const double self_xx = soft_dtw(x, x, cfg);
  ValueGrad out;
  out.value = sdtw_divergence_from_terms(cross.value, self_xx, self.value);
  out.grad.resize(y.length());
  for (std::size_t j = 0; j < y.length(); ++j)
    out.grad[j] = cross.grad[j] - 0.5 * self.grad[j];
  return out;
}

}  // namespace htsc
