#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>

#include "gsfcalc/error.hpp"

namespace gsfc::quad {

/// N-point Gauss–Legendre rule on [-1,1], nodes from Newton iteration on P_N.
template <int N>
struct GaussLegendre {
  std::array<double, N> x{};
  std::array<double, N> w{};

  GaussLegendre() {
    for (int i = 0; i < (N + 1) / 2; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 1; j <= N; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = N * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / dp;
        z -= dz;
        if (std::fabs(dz) < 1e-16) break;
      }
      x[i] = -z;
      x[N - 1 - i] = z;
      w[i] = w[N - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }

  static const GaussLegendre& get() {
    static const GaussLegendre rule;
    return rule;
  }
};

using GL16 = GaussLegendre<16>;

/// Composite 16-point Gauss–Legendre over `panels` equal panels. Also returns
/// the matching ∫|f| estimate, used as the scale for relative tolerances.
template <class F>
std::pair<double, double> composite_gl(F&& f, double a, double b, int panels) {
  const auto& r = GL16::get();
  const double h = (b - a) / panels;
  double s = 0.0, sa = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    const double mid = lo + 0.5 * h;
    double ps = 0.0, pa = 0.0;
    for (int i = 0; i < 16; ++i) {
      const double v = f(mid + 0.5 * h * r.x[i]);
      ps += r.w[i] * v;
      pa += r.w[i] * std::fabs(v);
    }
    s += ps;
    sa += pa;
  }
  return {0.5 * h * s, 0.5 * h * sa};
}

struct Options {
  int initial_panels = 64;
  int max_panels = 4096;
  double rel_tol = 1e-10;
};

struct Result {
  double value = 0.0;
  int panels = 0;
  bool converged = true;
};

/// ∫_a^b f by composite Gauss–Legendre, doubling the panel count until two
/// successive values agree to rel_tol·∫|f| or the panel cap is reached.
template <class F>
Result integrate(F&& f, double a, double b, Options opt = {}) {
  if (a == b) return {0.0, 0, true};
  if (a > b) {
    Result r = integrate(f, b, a, opt);
    r.value = -r.value;
    return r;
  }
  int panels = opt.initial_panels;
  double prev = composite_gl(f, a, b, panels).first;
  while (panels < opt.max_panels) {
    panels *= 2;
    const auto [cur, cur_scale] = composite_gl(f, a, b, panels);
    if (std::fabs(cur - prev) <= opt.rel_tol * std::max(cur_scale, 1e-300)) return {cur, panels, true};
    prev = cur;
  }
  return {prev, panels, false};
}

template <class F>
double integral(F&& f, double a, double b, Options opt = {}) {
  return integrate(std::forward<F>(f), a, b, opt).value;
}

/// Composite Simpson on equally spaced samples. An odd number of intervals
/// closes with the 3/8 rule on the last three; two samples fall back to the
/// trapezoid.
inline double simpson(std::span<const double> y, double h) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  if (n == 2) return 0.5 * h * (y[0] + y[1]);
  if (n == 3) return h / 3.0 * (y[0] + 4.0 * y[1] + y[2]);
  const std::size_t intervals = n - 1;
  std::size_t end = intervals % 2 == 0 ? n - 1 : n - 4;
  double s = 0.0;
  for (std::size_t i = 0; i + 2 <= end; i += 2) s += y[i] + 4.0 * y[i + 1] + y[i + 2];
  s *= h / 3.0;
  if (intervals % 2 == 1) s += 3.0 * h / 8.0 * (y[end] + 3.0 * y[end + 1] + 3.0 * y[end + 2] + y[end + 3]);
  return s;
}

}  // namespace gsfc::quad
