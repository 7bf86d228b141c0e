#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gsfcalc/error.hpp"
#include "gsfcalc/finite_diff.hpp"
#include "gsfcalc/gen_num.hpp"
#include "gsfcalc/gsf.hpp"
#include "gsfcalc/lagrangian.hpp"
#include "gsfcalc/quadrature.hpp"
#include "gsfcalc/trajectory.hpp"

namespace gsfc {

namespace detail {

inline void require_compatible(const Lagrangian& F, const Trajectory& u) {
  if (!F.gauge().same_as(u.gauge())) throw GaugeMismatch();
  if (F.dim() != u.dim()) throw PreconditionError("Lagrangian and trajectory dimensions differ");
}

inline void require_same_grid(const Trajectory& u, const Trajectory& eta) {
  if (!u.gauge().same_as(eta.gauge())) throw GaugeMismatch();
  if (u.dim() != eta.dim() || u.nodes() != eta.nodes()) throw PreconditionError("trajectories live on different grids");
  for (std::size_t k = 0; k < u.levels(); ++k) {
    if (u.t(k, 0) != eta.t(k, 0) || u.step(k) != eta.step(k)) throw PreconditionError("trajectories live on different grids");
  }
}

/// Simpson integral per level of a node-wise integrand.
template <class G>
GenNum integrate_nodes(const Trajectory& u, G&& integrand) {
  return GenNum::from_index(u.gauge_ptr(), [&](std::size_t k) {
    std::vector<double> y(u.nodes());
    for (std::size_t i = 0; i < u.nodes(); ++i) y[i] = integrand(k, i);
    return quad::simpson(y, u.step(k));
  });
}

/// Rows of d/dt F_v along u at level k.
inline Mat ddt_Fv(const Lagrangian& F, const Trajectory& u, std::size_t k) {
  const std::size_t N = u.nodes();
  Mat fv(F.dim(), N);
  for (std::size_t i = 0; i < N; ++i) fv.col(static_cast<Eigen::Index>(i)) = F.Fv(k, u.t(k, i), u.u(k, i), u.v(k, i));
  Mat out(F.dim(), N);
  for (int c = 0; c < F.dim(); ++c) {
    std::vector<double> row(N);
    for (std::size_t i = 0; i < N; ++i) row[i] = fv(c, static_cast<Eigen::Index>(i));
    const auto d = fd::d_dt(row, u.step(k));
    for (std::size_t i = 0; i < N; ++i) out(c, static_cast<Eigen::Index>(i)) = d[i];
  }
  return out;
}

}  // namespace detail

/// I(u) = ∫_a^b F(t, u, u̇) dt per level.
inline GenNum functional_value(const Lagrangian& F, const Trajectory& u) {
  detail::require_compatible(F, u);
  return detail::integrate_nodes(u, [&](std::size_t k, std::size_t i) { return F.F(k, u.t(k, i), u.u(k, i), u.v(k, i)); });
}

struct ElResidual {
  std::vector<Mat> samples;  // F_u - d/dt F_v per level, d × nodes
  GenNum max_norm;           // max over nodes and components
  GsfFamily family;          // interpolating time → ℝ^d family
};

/// F_u - d/dt F_v along u, with d/dt by the grid stencil.
inline ElResidual el_residual(const Lagrangian& F, const Trajectory& u) {
  detail::require_compatible(F, u);
  std::vector<Mat> r(u.levels());
  for (std::size_t k = 0; k < u.levels(); ++k) {
    const Mat dfv = detail::ddt_Fv(F, u, k);
    r[k].resize(F.dim(), static_cast<Eigen::Index>(u.nodes()));
    for (std::size_t i = 0; i < u.nodes(); ++i) {
      r[k].col(static_cast<Eigen::Index>(i)) =
          F.Fu(k, u.t(k, i), u.u(k, i), u.v(k, i)) - dfv.col(static_cast<Eigen::Index>(i));
    }
  }
  GenNum norm = GenNum::from_index(u.gauge_ptr(), [&](std::size_t k) { return r[k].cwiseAbs().maxCoeff(); });
  GsfFamily fam = sampled_family(u, r);
  return {std::move(r), std::move(norm), std::move(fam)};
}

struct FirstVariation {
  GenNum value;                 // ∫ η·(F_u - d/dt F_v)
  GenNum symmetric_difference;  // (I(u+sη) - I(u-sη)) / 2s
  bool consistent = true;
  std::string warning;
};

/// δI(u; η) in Euler–Lagrange form, cross-checked by a symmetric difference
/// with s = 1e-5. Agreement means |a - b| ≤ 1e-4·max(|a|, |b|) + 1e-8.
inline FirstVariation first_variation(const Lagrangian& F, const Trajectory& u, const VariationField& eta) {
  detail::require_compatible(F, u);
  detail::require_same_grid(u, eta);
  std::vector<Mat> el(u.levels());
  for (std::size_t k = 0; k < u.levels(); ++k) el[k] = detail::ddt_Fv(F, u, k);
  GenNum value = detail::integrate_nodes(u, [&](std::size_t k, std::size_t i) {
    const Vec r = F.Fu(k, u.t(k, i), u.u(k, i), u.v(k, i)) - el[k].col(static_cast<Eigen::Index>(i));
    return eta.u(k, i).dot(r);
  });
  constexpr double s = 1e-5;
  GenNum sd = (functional_value(F, u.perturbed(eta, s)) - functional_value(F, u.perturbed(eta, -s))) * (0.5 / s);
  FirstVariation out{std::move(value), std::move(sd), true, {}};
  for (std::size_t k = 0; k < u.levels(); ++k) {
    const double a = out.value[k], b = out.symmetric_difference[k];
    if (!(std::fabs(a - b) <= 1e-4 * std::max(std::fabs(a), std::fabs(b)) + 1e-8)) {
      out.consistent = false;
      std::ostringstream msg;
      msg << "first variation forms disagree at level " << k + 1 << ": " << a << " vs " << b;
      out.warning = msg.str();
      break;
    }
  }
  return out;
}

/// δ²I(u; η) = ∫ ηᵀF_uu η + 2ηᵀF_uv η̇ + η̇ᵀF_vv η̇.
inline GenNum second_variation(const Lagrangian& F, const Trajectory& u, const VariationField& eta) {
  detail::require_compatible(F, u);
  detail::require_same_grid(u, eta);
  return detail::integrate_nodes(u, [&](std::size_t k, std::size_t i) {
    const double t = u.t(k, i);
    const Vec uu = u.u(k, i), vv = u.v(k, i), e = eta.u(k, i), de = eta.v(k, i);
    return e.dot(F.Fuu(k, t, uu, vv) * e) + 2.0 * e.dot(F.Fuv(k, t, uu, vv) * de) + de.dot(F.Fvv(k, t, uu, vv) * de);
  });
}

/// Q(η): the accessory integral, the same quadratic form as the second variation.
inline GenNum accessory_integral(const Lagrangian& F, const Trajectory& u, const VariationField& eta) {
  return second_variation(F, u, eta);
}

struct LegendreReport {
  GenNum min_eigenvalue;  // min over nodes of λ_min(F_vv)
  bool pass = false;      // min ≥ -ρ^m_slack in the sharp order
};

inline LegendreReport legendre_check(const Lagrangian& F, const Trajectory& u) {
  detail::require_compatible(F, u);
  GenNum m = GenNum::from_index(u.gauge_ptr(), [&](std::size_t k) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u.nodes(); ++i) {
      const Mat P = F.Fvv(k, u.t(k, i), u.u(k, i), u.v(k, i));
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (P + P.transpose()), Eigen::EigenvaluesOnly);
      best = std::min(best, es.eigenvalues().minCoeff());
    }
    return best;
  });
  const GenNum tol = GenNum::from_index(u.gauge_ptr(), [&](std::size_t k) {
    return -u.gauge().rho_pow(k, AsymptoticPolicy::m_slack);
  });
  const bool pass = gen_le(tol, m) == Truth::yes;
  return {std::move(m), pass};
}

struct SolverOptions {
  std::size_t rk4_steps = 1024;
  double newton_tol = 1e-9;
  int max_iterations = 50;
};

struct BvpResult {
  Trajectory trajectory;
  GenVec initial_velocity;
  std::vector<int> iterations;
  std::vector<std::string> warnings;
};

namespace detail {

/// ü from the Euler–Lagrange equation: F_vv ü = F_u - F_vt - F_vu u̇.
inline Vec el_acceleration(const Lagrangian& F, std::size_t k, double t, const Vec& u, const Vec& v) {
  const Mat P = F.Fvv(k, t, u, v);
  const Vec rhs = F.Fu(k, t, u, v) - F.Fvt(k, t, u, v) - F.Fuv(k, t, u, v).transpose() * v;
  Eigen::FullPivLU<Mat> lu(P);
  if (!lu.isInvertible()) throw SolverError("singular F_vv");
  return lu.solve(rhs);
}

/// RK4 on u̇ = v, v̇ = ü(t, u, v); fills U, V (d × steps+1) when given.
inline Vec shoot_el(const Lagrangian& F, std::size_t k, double a, double b, const Vec& p, const Vec& c, std::size_t steps,
                    Mat* U, Mat* V) {
  const double h = (b - a) / static_cast<double>(steps);
  Vec u = p, v = c;
  if (U) {
    U->resize(p.size(), static_cast<Eigen::Index>(steps + 1));
    V->resize(p.size(), static_cast<Eigen::Index>(steps + 1));
    U->col(0) = u;
    V->col(0) = v;
  }
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = a + h * static_cast<double>(i);
    const Vec k1u = v, k1v = el_acceleration(F, k, t, u, v);
    const Vec u2 = u + 0.5 * h * k1u, v2 = v + 0.5 * h * k1v;
    const Vec k2u = v2, k2v = el_acceleration(F, k, t + 0.5 * h, u2, v2);
    const Vec u3 = u + 0.5 * h * k2u, v3 = v + 0.5 * h * k2v;
    const Vec k3u = v3, k3v = el_acceleration(F, k, t + 0.5 * h, u3, v3);
    const Vec u4 = u + h * k3u, v4 = v + h * k3v;
    const Vec k4u = v4, k4v = el_acceleration(F, k, t + h, u4, v4);
    u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    if (!u.allFinite() || !v.allFinite()) throw SolverError("trajectory blew up during shooting");
    if (U) {
      U->col(static_cast<Eigen::Index>(i + 1)) = u;
      V->col(static_cast<Eigen::Index>(i + 1)) = v;
    }
  }
  return u;
}

/// Forward-difference Jacobian of c ↦ endpoint(c).
template <class Shoot>
Mat shooting_jacobian(Shoot&& shoot, const Vec& c, const Vec& base) {
  const Eigen::Index d = c.size();
  Mat J(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = 1e-7 * (1.0 + std::fabs(c(j)));
    Vec cj = c;
    cj(j) += h;
    J.col(j) = (shoot(cj) - base) / h;
  }
  return J;
}

struct NewtonOutcome {
  Vec c;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;
  double sigma_min = 0.0;
};

/// Damped Newton on the shooting map with FD Jacobian. At least min_iter
/// steps are taken; σ_min of the final Jacobian is reported on request.
template <class Shoot>
NewtonOutcome newton_shoot(Shoot&& shoot, Vec c, const Vec& target, double tol, int max_iter, int min_iter = 0,
                           bool with_sigma = true) {
  NewtonOutcome out;
  Vec G = shoot(c) - target;
  double r = G.cwiseAbs().maxCoeff();
  for (int it = 0; it < max_iter && (it < min_iter || !(r < tol)); ++it) {
    out.iterations = it + 1;
    const Mat J = shooting_jacobian(shoot, c, G + target);
    Eigen::ColPivHouseholderQR<Mat> qr(J);
    if (qr.rank() < J.cols()) break;
    const Vec delta = qr.solve(-G);
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 12; ++ls, lambda *= 0.5) {
      const Vec cn = c + lambda * delta;
      Vec Gn;
      try {
        Gn = shoot(cn) - target;
      } catch (const SolverError&) {
        continue;
      }
      const double rn = Gn.cwiseAbs().maxCoeff();
      if (rn < r || rn == 0.0 || ls == 11) {
        c = cn;
        G = Gn;
        r = rn;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  out.c = c;
  out.residual = r;
  out.converged = r < tol;
  if (with_sigma) {
    const Mat J = shooting_jacobian(shoot, c, G + target);
    Eigen::JacobiSVD<Mat> svd(J);
    out.sigma_min = svd.singularValues()(svd.singularValues().size() - 1);
  }
  return out;
}

}  // namespace detail

/// Solves F_u - d/dt F_v = 0 with u(a) = p, u(b) = q per level by RK4
/// shooting and Newton on the initial velocity.
inline BvpResult solve_el_bvp(const Lagrangian& F, const GenVec& p, const GenVec& q, const IntervalDomain& dom,
                              const SolverOptions& opt = {}) {
  const int d = F.dim();
  if (p.size() != static_cast<std::size_t>(d) || q.size() != static_cast<std::size_t>(d)) {
    throw PreconditionError("boundary values have the wrong dimension");
  }
  if (!F.gauge().same_as(*dom.gauge_ptr())) throw GaugeMismatch();
  if (opt.rk4_steps < 4) throw PreconditionError("need at least 4 RK4 steps");
  const std::size_t K = F.gauge().size();
  std::vector<Mat> U(K), V(K);
  std::vector<int> iters(K);
  std::vector<Vec> c0(K);
  std::vector<std::string> warnings;
  for (std::size_t k = 0; k < K; ++k) {
    const double a = dom.a(k), b = dom.b(k);
    Vec pk(d), qk(d);
    for (int i = 0; i < d; ++i) {
      pk(i) = p[static_cast<std::size_t>(i)][k];
      qk(i) = q[static_cast<std::size_t>(i)][k];
    }
    const Vec guess = (qk - pk) / (b - a);
    if (!Eigen::FullPivLU<Mat>(F.Fvv(k, a, pk, guess)).isInvertible()) {
      throw SolverError("singular F_vv at the initial guess (level " + std::to_string(k + 1) + ")");
    }
    auto shoot = [&](const Vec& c) { return detail::shoot_el(F, k, a, b, pk, c, opt.rk4_steps, nullptr, nullptr); };
    const auto res = detail::newton_shoot(shoot, guess, qk, opt.newton_tol, opt.max_iterations);
    if (!res.converged) {
      std::ostringstream msg;
      msg << "Newton shooting failed at level " << k + 1 << " (eps=" << F.gauge().eps(k) << "): residual "
          << res.residual << " after " << res.iterations << " iterations";
      throw SolverError(msg.str());
    }
    if (res.sigma_min < 1e-8 * (b - a) && warnings.empty()) {
      warnings.push_back("shooting map is singular at the solution; b may be conjugate to a");
    }
    detail::shoot_el(F, k, a, b, pk, res.c, opt.rk4_steps, &U[k], &V[k]);
    iters[k] = res.iterations;
    c0[k] = res.c;
  }
  GenVec init;
  for (int i = 0; i < d; ++i) init.push_back(GenNum::from_index(F.gauge_ptr(), [&](std::size_t k) { return c0[k](i); }));
  return {Trajectory(dom, d, opt.rk4_steps + 1, std::move(U), std::move(V)), std::move(init), std::move(iters),
          std::move(warnings)};
}

}  // namespace gsfc
