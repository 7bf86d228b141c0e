#pragma once

// Reference geodesics of g = e^{2φ}·Id, φ(x, y) = A·x|x|, integrated with the
// exact Christoffel symbols Γ^k_ij = δ_ik ∂_jφ + δ_jk ∂_iφ - δ_ij ∂_kφ and a
// fixed-step Dormand–Prince 5(4) scheme.

#include <array>
#include <cmath>
#include <vector>

namespace oracle {

struct State {
  double x, y, vx, vy;
};

inline State operator+(State a, State b) { return {a.x + b.x, a.y + b.y, a.vx + b.vx, a.vy + b.vy}; }
inline State operator*(double s, State a) { return {s * a.x, s * a.y, s * a.vx, s * a.vy}; }

struct ConformalC11 {
  double amplitude = 0.1;

  double conformal_factor(double x) const { return std::exp(2.0 * amplitude * x * std::fabs(x)); }

  State rhs(const State& s) const {
    const double px = 2.0 * amplitude * std::fabs(s.x);  // ∂_xφ; ∂_yφ = 0
    // ÿ^k = -Γ^k_ij v^i v^j = -(2 v^k (∇φ·v) - |v|² ∂_kφ)
    const double dot = px * s.vx, v2 = s.vx * s.vx + s.vy * s.vy;
    return {s.vx, s.vy, -(2.0 * s.vx * dot - v2 * px), -(2.0 * s.vy * dot)};
  }
};

struct Curve {
  std::vector<State> samples;  // uniform in t on [0, 1]
  double length = 0.0;
};

template <class Metric>
State dopri_step(const Metric& m, const State& s, double h) {
  static constexpr double a21 = 1.0 / 5, a31 = 3.0 / 40, a32 = 9.0 / 40, a41 = 44.0 / 45, a42 = -56.0 / 15,
                          a43 = 32.0 / 9, a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729, a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656, b1 = 35.0 / 384, b3 = 500.0 / 1113,
                          b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  const State k1 = m.rhs(s);
  const State k2 = m.rhs(s + (h * a21) * k1);
  const State k3 = m.rhs(s + h * (a31 * k1 + a32 * k2));
  const State k4 = m.rhs(s + h * (a41 * k1 + a42 * k2 + a43 * k3));
  const State k5 = m.rhs(s + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const State k6 = m.rhs(s + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  return s + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
}

template <class Metric>
std::vector<State> integrate(const Metric& m, State s, std::size_t steps) {
  std::vector<State> out{s};
  const double h = 1.0 / static_cast<double>(steps);
  for (std::size_t i = 0; i < steps; ++i) out.push_back(s = dopri_step(m, s, h));
  return out;
}

/// Shooting on [0, 1] from p to q with `steps` integrator steps; returns
/// every `stride`-th sample and the length by composite Simpson on the fine grid.
template <class Metric>
Curve boundary_geodesic(const Metric& m, std::array<double, 2> p, std::array<double, 2> q, std::size_t steps,
                        std::size_t stride) {
  double c[2] = {q[0] - p[0], q[1] - p[1]};
  auto end = [&](double cx, double cy) {
    const State e = integrate(m, {p[0], p[1], cx, cy}, steps).back();
    return std::array<double, 2>{e.x - q[0], e.y - q[1]};
  };
  for (int it = 0; it < 60; ++it) {
    const auto r = end(c[0], c[1]);
    if (std::hypot(r[0], r[1]) < 1e-13) break;
    const double d = 1e-7;
    const auto rx = end(c[0] + d, c[1]), ry = end(c[0], c[1] + d);
    const double j11 = (rx[0] - r[0]) / d, j21 = (rx[1] - r[1]) / d, j12 = (ry[0] - r[0]) / d, j22 = (ry[1] - r[1]) / d;
    const double det = j11 * j22 - j12 * j21;
    c[0] -= (j22 * r[0] - j12 * r[1]) / det;
    c[1] -= (-j21 * r[0] + j11 * r[1]) / det;
  }
  const auto fine = integrate(m, {p[0], p[1], c[0], c[1]}, steps);
  Curve out;
  for (std::size_t i = 0; i < fine.size(); i += stride) out.samples.push_back(fine[i]);
  const double h = 1.0 / static_cast<double>(steps);
  double acc = 0.0;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const State& s = fine[i];
    const double f = std::sqrt(m.conformal_factor(s.x) * (s.vx * s.vx + s.vy * s.vy));
    const double w = (i == 0 || i + 1 == fine.size()) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * f;
  }
  out.length = acc * h / 3.0;
  return out;
}

}  // namespace oracle
