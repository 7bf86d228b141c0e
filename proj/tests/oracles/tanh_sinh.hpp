#pragma once

// Double-exponential quadrature, independent of the library's Gauss-Legendre
// panels. Used to freeze reference integrals.

#include <cmath>
#include <functional>

namespace oracle {

/// ∫_a^b f by tanh-sinh with step halving until two levels agree to tol.
inline double tanh_sinh(const std::function<double(double)>& f, double a, double b, double tol = 1e-14) {
  const double r = 0.5 * (b - a);
  const double half_pi = 2.0 * std::atan(1.0);
  auto term = [&](double t) {
    const double s = half_pi * std::sinh(t);
    const double ch = std::cosh(s);
    const double x = std::tanh(s);
    const double w = half_pi * std::cosh(t) / (ch * ch);
    // Distance to the endpoints without cancellation: 1 - tanh(s) = 2/(e^{2s}+1).
    const double gap = 2.0 / (std::exp(2.0 * std::fabs(s)) + 1.0);
    if (gap * r == 0.0) return 0.0;
    const double xs = x >= 0 ? b - r * gap : a + r * gap;
    return w * f(xs);
  };
  const double tmax = 3.2;
  double h = 0.5;
  double sum = term(0.0);
  for (double t = h; t <= tmax; t += h) sum += term(t) + term(-t);
  double prev = sum * h;
  for (int level = 0; level < 12; ++level) {
    h *= 0.5;
    for (double t = h; t <= tmax; t += 2.0 * h) sum += term(t) + term(-t);
    const double cur = sum * h;
    if (std::fabs(cur - prev) <= tol * (1.0 + std::fabs(cur))) return r * cur;
    prev = cur;
  }
  return r * prev;
}

}  // namespace oracle
