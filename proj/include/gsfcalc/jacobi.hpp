#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gsfcalc/csv.hpp"
#include "gsfcalc/error.hpp"
#include "gsfcalc/finite_diff.hpp"
#include "gsfcalc/gen_num.hpp"
#include "gsfcalc/lagrangian.hpp"
#include "gsfcalc/quadrature.hpp"
#include "gsfcalc/trajectory.hpp"
#include "gsfcalc/varcalc.hpp"

namespace gsfc {

/// Fundamental matrix of the Jacobi system along a trajectory: J(a) = 0,
/// J̇(a) = Id, with momentum Π = F_vv J̇ + F_vu J. Stored per level and node.
struct JacobiSolution {
  Trajectory trajectory;
  std::vector<std::vector<Mat>> J, Pi;
  std::vector<std::vector<double>> det;
  /// Sign changes of det J on (a, b], refined by bisection, per level.
  std::vector<std::vector<double>> roots;
};

namespace detail {

/// Coefficients of the Jacobi system at level k and time t: P = F_vv,
/// C = F_vu, R = F_uu. Off-node times use four-point interpolation of u, u̇.
struct JacobiCoefficients {
  Mat P, C, R;
};

inline JacobiCoefficients jacobi_coefficients(const Lagrangian& F, const Trajectory& u, std::size_t k, double t) {
  const double h = u.step(k), a = u.t(k, 0);
  const double s = (t - a) / h;
  const double r = std::round(s);
  Vec uu, vv;
  if (std::fabs(s - r) < 1e-12 && r >= 0 && r <= static_cast<double>(u.nodes() - 1)) {
    uu = u.u(k, static_cast<std::size_t>(r));
    vv = u.v(k, static_cast<std::size_t>(r));
  } else {
    uu = interp4(u.u(k), a, h, t);
    vv = interp4(u.v(k), a, h, t);
  }
  return {F.Fvv(k, t, uu, vv), F.Fuv(k, t, uu, vv).transpose(), F.Fuu(k, t, uu, vv)};
}

struct JacobiState {
  Mat J, Pi;
};

inline JacobiState jacobi_rhs(const Lagrangian& F, const Trajectory& u, std::size_t k, double t, const JacobiState& y) {
  const auto c = jacobi_coefficients(F, u, k, t);
  Eigen::FullPivLU<Mat> lu(c.P);
  if (!lu.isInvertible()) throw SolverError("singular F_vv along the trajectory");
  const Mat dJ = lu.solve(y.Pi - c.C * y.J);
  return {dJ, c.R * y.J + c.C.transpose() * dJ};
}

inline JacobiState jacobi_step(const Lagrangian& F, const Trajectory& u, std::size_t k, double t, double h,
                               const JacobiState& y) {
  const auto k1 = jacobi_rhs(F, u, k, t, y);
  const auto k2 = jacobi_rhs(F, u, k, t + 0.5 * h, {y.J + 0.5 * h * k1.J, y.Pi + 0.5 * h * k1.Pi});
  const auto k3 = jacobi_rhs(F, u, k, t + 0.5 * h, {y.J + 0.5 * h * k2.J, y.Pi + 0.5 * h * k2.Pi});
  const auto k4 = jacobi_rhs(F, u, k, t + h, {y.J + h * k3.J, y.Pi + h * k3.Pi});
  return {y.J + h / 6.0 * (k1.J + 2.0 * k2.J + 2.0 * k3.J + k4.J),
          y.Pi + h / 6.0 * (k1.Pi + 2.0 * k2.Pi + 2.0 * k3.Pi + k4.Pi)};
}

inline JacobiState jacobi_initial(const Lagrangian& F, const Trajectory& u, std::size_t k) {
  const int d = u.dim();
  const auto c = jacobi_coefficients(F, u, k, u.t(k, 0));
  return {Mat::Zero(d, d), c.P};
}

}  // namespace detail

/// Integrates the Jacobi system per level with RK4 on the trajectory's grid
/// and locates sign changes of det J by bisection to 1e-10.
inline JacobiSolution jacobi_solve(const Lagrangian& F, const Trajectory& u) {
  detail::require_compatible(F, u);
  const std::size_t K = u.levels(), N = u.nodes();
  JacobiSolution sol{u, std::vector<std::vector<Mat>>(K), std::vector<std::vector<Mat>>(K),
                     std::vector<std::vector<double>>(K), std::vector<std::vector<double>>(K)};
  for (std::size_t k = 0; k < K; ++k) {
    const double h = u.step(k);
    for (std::size_t i = 0; i < N; ++i) {
      const auto c = detail::jacobi_coefficients(F, u, k, u.t(k, i));
      if (!Eigen::FullPivLU<Mat>(c.P).isInvertible()) {
        throw SolverError("singular F_vv along the trajectory (level " + std::to_string(k + 1) + ")");
      }
    }
    detail::JacobiState y = detail::jacobi_initial(F, u, k);
    auto& Jk = sol.J[k];
    auto& Pk = sol.Pi[k];
    auto& Dk = sol.det[k];
    Jk.reserve(N);
    Pk.reserve(N);
    Dk.reserve(N);
    Jk.push_back(y.J);
    Pk.push_back(y.Pi);
    Dk.push_back(y.J.determinant());
    for (std::size_t i = 0; i + 1 < N; ++i) {
      const double t = u.t(k, i);
      const detail::JacobiState next = detail::jacobi_step(F, u, k, t, h, y);
      const double dnext = next.J.determinant();
      if (i >= 1 && (Dk.back() * dnext < 0.0 || (dnext == 0.0 && Dk.back() != 0.0))) {
        double lo = 0.0, hi = h;
        const double sign_lo = Dk.back() > 0.0 ? 1.0 : -1.0;
        while (hi - lo > 1e-10) {
          const double mid = 0.5 * (lo + hi);
          const double dm = detail::jacobi_step(F, u, k, t, mid, y).J.determinant();
          (dm * sign_lo > 0.0 ? lo : hi) = mid;
        }
        sol.roots[k].push_back(t + 0.5 * (lo + hi));
      }
      y = next;
      Jk.push_back(y.J);
      Pk.push_back(y.Pi);
      Dk.push_back(dnext);
    }
  }
  return sol;
}

/// max over nodes of |d/dt Π - (F_uv J̇ + F_uu J)| per level, with d/dt by
/// the grid stencil.
inline GenNum jacobi_residual(const Lagrangian& F, const JacobiSolution& sol) {
  const Trajectory& u = sol.trajectory;
  const int d = u.dim();
  return GenNum::from_index(u.gauge_ptr(), [&](std::size_t k) {
    const std::size_t N = u.nodes();
    double worst = 0.0;
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) {
        std::vector<double> row(N);
        for (std::size_t i = 0; i < N; ++i) row[i] = sol.Pi[k][i](r, c);
        const auto dPi = fd::d_dt(row, u.step(k));
        for (std::size_t i = 0; i < N; ++i) {
          const auto co = detail::jacobi_coefficients(F, u, k, u.t(k, i));
          const Mat dJ = co.P.fullPivLu().solve(sol.Pi[k][i] - co.C * sol.J[k][i]);
          const Mat rhs = co.R * sol.J[k][i] + co.C.transpose() * dJ;
          worst = std::max(worst, std::fabs(dPi[i] - rhs(r, c)));
        }
      }
    }
    return worst;
  });
}

struct ConjugateReport {
  std::vector<std::vector<double>> per_eps;
  /// Root counts agree on the tail, so roots are matched by index into GenNums.
  bool aggregated = false;
  std::vector<GenNum> points;
  std::vector<StandardPartReport> standard_parts;
  std::string message;
};

/// Matches per-level conjugate parameters by root index. Levels in the head
/// of the grid with fewer roots carry NaN.
inline ConjugateReport conjugate_points(const JacobiSolution& sol) {
  ConjugateReport rep;
  rep.per_eps = sol.roots;
  const Gauge& g = sol.trajectory.gauge();
  const std::size_t b = g.tail_begin();
  const std::size_t count = sol.roots[b].size();
  for (std::size_t k = b; k < g.size(); ++k) {
    if (sol.roots[k].size() != count) {
      rep.message = "root-count mismatch across the grid tail";
      return rep;
    }
  }
  rep.aggregated = true;
  for (std::size_t r = 0; r < count; ++r) {
    GenNum x = GenNum::from_index(sol.trajectory.gauge_ptr(), [&](std::size_t k) {
      return r < sol.roots[k].size() ? sol.roots[k][r] : std::numeric_limits<double>::quiet_NaN();
    });
    rep.standard_parts.push_back(standard_part_report(x));
    rep.points.push_back(std::move(x));
  }
  return rep;
}

/// Q of the broken field η = J(t)c on [a, a'] and 0 on [a', b], with a' the
/// first conjugate parameter and c a null vector of J(a'). The accessory
/// integral is the sum over the two segments; it vanishes for a true Jacobi
/// field. Levels without a conjugate point carry NaN.
inline GenNum broken_accessory_integral(const Lagrangian& F, const JacobiSolution& sol, std::size_t steps = 1024) {
  const Trajectory& u = sol.trajectory;
  return GenNum::from_index(u.gauge_ptr(), [&](std::size_t k) {
    if (sol.roots[k].empty()) return std::numeric_limits<double>::quiet_NaN();
    const double a = u.t(k, 0), ap = sol.roots[k].front();
    const double h = (ap - a) / static_cast<double>(steps);
    std::vector<detail::JacobiState> ys{detail::jacobi_initial(F, u, k)};
    for (std::size_t i = 0; i < steps; ++i) ys.push_back(detail::jacobi_step(F, u, k, a + h * static_cast<double>(i), h, ys.back()));
    Eigen::JacobiSVD<Mat> svd(ys.back().J, Eigen::ComputeFullV);
    const Vec c = svd.matrixV().col(svd.matrixV().cols() - 1);
    std::vector<double> psi(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
      const double t = a + h * static_cast<double>(i);
      const auto co = detail::jacobi_coefficients(F, u, k, t);
      const Vec eta = ys[i].J * c;
      const Vec deta = co.P.fullPivLu().solve(ys[i].Pi * c - co.C * eta);
      psi[i] = eta.dot(co.R * eta) + 2.0 * eta.dot(co.C.transpose() * deta) + deta.dot(co.P * deta);
    }
    const double first = quad::simpson(psi, h);
    const double second = 0.0;  // η ≡ 0 on [a', b]
    return first + second;
  });
}

/// Columns k, eps, index, t.
inline void write_conjugate_csv(std::ostream& os, const JacobiSolution& sol) {
  csv::write_row(os, {"k", "eps", "index", "t"});
  const Gauge& g = sol.trajectory.gauge();
  for (std::size_t k = 0; k < sol.roots.size(); ++k) {
    for (std::size_t r = 0; r < sol.roots[k].size(); ++r) {
      csv::write_row(os, {std::to_string(k + 1), csv::num(g.eps(k)), std::to_string(r + 1), csv::num(sol.roots[k][r])});
    }
  }
}

}  // namespace gsfc
