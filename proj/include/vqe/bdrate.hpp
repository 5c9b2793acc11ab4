#pragma once

// Bjøntegaard delta-rate between two rate-distortion curves: interpolate
// ln(rate) as a function of quality, integrate both over the common
// quality interval, and convert the mean log-rate gap to a percentage.
// Exactly four points use the classic single interpolating cubic;
// longer curves use monotone piecewise-cubic Hermite (Fritsch–Carlson).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vqe/errors.hpp"

namespace vqe {

struct RdPoint {
  double rate_kbps = 0.0;
  double psnr_db = 0.0;
};

using RdCurve = std::vector<RdPoint>;

struct RdValidation {
  bool ok = true;
  std::string message;
};

// Hard invariants (size, strictly increasing rate) throw from bd_rate; the
// softer quality-monotonicity expectation is reported here.
inline RdValidation validate_rd_curve(const RdCurve& c) {
  if (c.size() < 4) return {false, "curve needs at least 4 points"};
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (c[i].rate_kbps <= c[i - 1].rate_kbps) {
      return {false, "rate not strictly increasing at point " + std::to_string(i)};
    }
    if (c[i].psnr_db < c[i - 1].psnr_db) {
      return {false, "quality decreases with rate at point " + std::to_string(i)};
    }
  }
  return {};
}

namespace detail {

// Cubic polynomial through exactly four (x, y) points, by Vandermonde solve
// with partial pivoting.
struct Cubic {
  double a[4] = {0, 0, 0, 0};

  double eval(double x) const { return a[0] + x * (a[1] + x * (a[2] + x * a[3])); }
};

inline Cubic fit_cubic(const std::vector<double>& x, const std::vector<double>& y) {
  double m[4][5];
  for (int i = 0; i < 4; ++i) {
    double p = 1;
    for (int j = 0; j < 4; ++j) {
      m[i][j] = p;
      p *= x[i];
    }
    m[i][4] = y[i];
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
    }
    std::swap(m[col], m[piv]);
    if (std::fabs(m[col][col]) < 1e-14) throw ConfigError("bd_rate: degenerate quality values");
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
    }
  }
  Cubic out;
  for (int i = 0; i < 4; ++i) out.a[i] = m[i][4] / m[i][i];
  return out;
}

// Monotone piecewise-cubic Hermite slopes (Fritsch–Carlson).
inline std::vector<double> pchip_slopes(const std::vector<double>& x,
                                        const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> h(n - 1), delta(n - 1), m(n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  auto endpoint = [&](double h0, double h1, double d0, double d1) {
    double s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0) {
      s = 0;
    } else if (d0 * d1 < 0 && std::fabs(s) > 3 * std::fabs(d0)) {
      s = 3 * d0;
    }
    return s;
  };
  m[0] = endpoint(h[0], h[1], delta[0], delta[1]);
  m[n - 1] = endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0) {
      m[i] = 0;
    } else {
      const double w1 = 2 * h[i] + h[i - 1];
      const double w2 = h[i] + 2 * h[i - 1];
      m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  return m;
}

struct LogRateInterp {
  bool single_cubic = false;
  Cubic cubic;
  std::vector<double> x, y, slope;

  double eval(double q) const {
    if (single_cubic) return cubic.eval(q);
    // locate the piece (q guaranteed within [x.front(), x.back()])
    std::size_t i = 0;
    while (i + 2 < x.size() && q > x[i + 1]) ++i;
    const double h = x[i + 1] - x[i];
    const double t = (q - x[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y[i] + (t3 - 2 * t2 + t) * h * slope[i] +
           (-2 * t3 + 3 * t2) * y[i + 1] + (t3 - t2) * h * slope[i + 1];
  }
};

inline LogRateInterp make_interp(const RdCurve& c) {
  LogRateInterp li;
  li.x.reserve(c.size());
  li.y.reserve(c.size());
  for (const RdPoint& p : c) {
    if (p.rate_kbps <= 0) throw ConfigError("bd_rate: rates must be positive");
    li.x.push_back(p.psnr_db);
    li.y.push_back(std::log(p.rate_kbps));
  }
  for (std::size_t i = 1; i < li.x.size(); ++i) {
    if (li.x[i] <= li.x[i - 1]) {
      throw ConfigError("bd_rate: quality must be strictly increasing, violation at point " +
                        std::to_string(i));
    }
  }
  if (c.size() == 4) {
    li.single_cubic = true;
    li.cubic = fit_cubic(li.x, li.y);
  } else {
    li.slope = pchip_slopes(li.x, li.y);
  }
  return li;
}

// Integrates a piecewise-cubic function exactly with 2-point Gauss-Legendre
// on each subinterval of [lo, hi] split at the knots.
inline double integrate(const LogRateInterp& li, double lo, double hi) {
  std::vector<double> cuts{lo, hi};
  for (double k : li.x) {
    if (k > lo && k < hi) cuts.push_back(k);
  }
  std::sort(cuts.begin(), cuts.end());
  const double g = 1.0 / std::sqrt(3.0);
  double total = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    const double mid = (a + b) / 2, half = (b - a) / 2;
    total += half * (li.eval(mid - half * g) + li.eval(mid + half * g));
  }
  return total;
}

}  // namespace detail

// Percent bitrate difference of `test` against `anchor` at equal quality;
// negative values are savings.
inline double bd_rate(const RdCurve& anchor, const RdCurve& test) {
  if (anchor.size() < 4 || test.size() < 4) {
    throw ConfigError("bd_rate: curves need at least 4 points");
  }
  for (const RdCurve* c : {&anchor, &test}) {
    for (std::size_t i = 1; i < c->size(); ++i) {
      if ((*c)[i].rate_kbps <= (*c)[i - 1].rate_kbps) {
        throw ConfigError("bd_rate: rate must be strictly increasing, violation at point " +
                          std::to_string(i));
      }
    }
  }
  const auto ia = detail::make_interp(anchor);
  const auto it = detail::make_interp(test);
  const double lo = std::max(ia.x.front(), it.x.front());
  const double hi = std::min(ia.x.back(), it.x.back());
  if (hi <= lo) throw ConfigError("bd_rate: no quality overlap between curves");
  const double avg =
      (detail::integrate(it, lo, hi) - detail::integrate(ia, lo, hi)) / (hi - lo);
  return (std::exp(avg) - 1.0) * 100.0;
}

}  // namespace vqe
