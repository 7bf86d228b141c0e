#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "gsfcalc/error.hpp"

namespace gsfc::fd {

/// Step for central differences at grid level with the given log ρ:
/// h = max(ρ^0.35, 1e-7)·(1+|x|).
inline double gauge_step(double log_rho, double x) {
  return std::max(std::exp(0.35 * log_rho), 1e-7) * (1.0 + std::fabs(x));
}

struct Estimate {
  double value = 0.0;
  double error = std::numeric_limits<double>::infinity();
};

/// Ridders' extrapolated central difference for f'(x), starting from step h0
/// and shrinking it by 1.4 per stage.
template <class F>
Estimate ridders(F&& f, double x, double h0) {
  constexpr int ntab = 12;
  constexpr double con = 1.4, con2 = con * con, safe = 2.0;
  double a[ntab][ntab];
  double h = h0;
  Estimate best;
  a[0][0] = (f(x + h) - f(x - h)) / (2.0 * h);
  best.value = a[0][0];
  for (int i = 1; i < ntab; ++i) {
    h /= con;
    a[0][i] = (f(x + h) - f(x - h)) / (2.0 * h);
    double fac = con2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
      fac *= con2;
      const double err = std::max(std::fabs(a[j][i] - a[j - 1][i]), std::fabs(a[j][i] - a[j - 1][i - 1]));
      if (err <= best.error) {
        best.error = err;
        best.value = a[j][i];
      }
    }
    if (std::fabs(a[i][i] - a[i - 1][i - 1]) >= safe * best.error) break;
  }
  return best;
}

/// Ridders from h0; when the table's own error estimate is poor the feature
/// scale is finer than h0, so restart from h0/100 and keep the best estimate.
template <class F>
Estimate adaptive_ridders(F&& f, double x, double h0, double rel_tol = 1e-9) {
  Estimate best;
  double best_rel = std::numeric_limits<double>::infinity();
  const double h_floor = 1e-13 * (1.0 + std::fabs(x));
  for (double h = h0; h >= h_floor; h *= 1e-2) {
    const Estimate e = ridders(f, x, h);
    const double r = e.error / std::max(std::fabs(e.value), 1.0);
    if (r < best_rel) {
      best_rel = r;
      best = e;
    }
    if (best_rel <= rel_tol) break;
  }
  return best;
}

template <class F>
double derivative(F&& f, double x, double h0) {
  return adaptive_ridders(std::forward<F>(f), x, h0).value;
}

/// d/dt of equally spaced samples: fourth-order central stencil inside,
/// fourth-order one-sided stencils on the two first and two last nodes.
inline std::vector<double> d_dt(std::span<const double> y, double h) {
  const std::size_t n = y.size();
  if (n < 5) throw PreconditionError("d_dt needs at least 5 samples");
  std::vector<double> d(n);
  const double c = 1.0 / (12.0 * h);
  d[0] = c * (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]);
  d[1] = c * (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]);
  for (std::size_t i = 2; i + 2 < n; ++i) d[i] = c * (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]);
  d[n - 2] = c * (3.0 * y[n - 1] + 10.0 * y[n - 2] - 18.0 * y[n - 3] + 6.0 * y[n - 4] - y[n - 5]);
  d[n - 1] = c * (25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4] + 3.0 * y[n - 5]);
  return d;
}

}  // namespace gsfc::fd
