#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gsfcalc/error.hpp"
#include "gsfcalc/finite_diff.hpp"
#include "gsfcalc/gen_num.hpp"
#include "gsfcalc/lagrangian.hpp"
#include "gsfcalc/trajectory.hpp"
#include "gsfcalc/varcalc.hpp"

namespace gsfc {

/// One-parameter family (t, l) ↦ (T_s(t, l), L_s(t, l)) of transformations.
struct SymmetryFamily {
  using TimeMap = std::function<double(std::size_t k, double t, const Vec& l, double s)>;
  using SpaceMap = std::function<Vec(std::size_t k, double t, const Vec& l, double s)>;

  TimeMap T;
  SpaceMap L;
  bool time_dependent = false;

  /// L_s(t, l) = l + s·dir, T_s = t.
  static SymmetryFamily space_translation(const Vec& dir) {
    return {[](std::size_t, double t, const Vec&, double) { return t; },
            [dir](std::size_t, double, const Vec& l, double s) { return Vec(l + s * dir); }, false};
  }

  /// T_s(t, l) = t + s, L_s = l.
  static SymmetryFamily time_translation() {
    return {[](std::size_t, double t, const Vec&, double s) { return t + s; },
            [](std::size_t, double, const Vec& l, double) { return l; }, true};
  }
};

struct NoetherReport {
  std::vector<Mat> charge;  // per level, 1 × nodes
  GenNum drift;             // max_t |charge(t) - charge(a)|
  GsfFamily family;
  bool invariant = true;
  std::vector<std::string> warnings;
};

struct NoetherOptions {
  double el_tol = 1e-6;
  double invariance_tol = 1e-6;
};

/// Noether charge F_v·∂_sL_s + (F - F_v·u̇)·∂_sT_s at s = 0 along u, with
/// contract checks for the identity at s = 0, the invariance identity on
/// probe values of s, and the Euler–Lagrange equation.
inline NoetherReport noether_charge(const Lagrangian& F, const Trajectory& u, const SymmetryFamily& sym,
                                    const NoetherOptions& opt = {}) {
  detail::require_compatible(F, u);
  if (!sym.T || !sym.L) throw PreconditionError("symmetry needs both maps");
  const std::size_t K = u.levels(), N = u.nodes();
  std::vector<std::string> warnings;
  bool invariant = true, identity_ok = true;

  const std::size_t stride = std::max<std::size_t>(1, N / 16);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < N; i += stride) {
      const double t = u.t(k, i);
      const Vec uu = u.u(k, i), vv = u.v(k, i);
      if (std::fabs(sym.T(k, t, uu, 0.0) - t) > 1e-12 * (1.0 + std::fabs(t)) ||
          (sym.L(k, t, uu, 0.0) - uu).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + uu.cwiseAbs().maxCoeff())) {
        identity_ok = false;
      }
      const double f0 = F.F(k, t, uu, vv);
      for (double s : {-1e-2, 1e-2}) {
        const double h = 1e-5 * (1.0 + std::fabs(t));
        const Vec up = uu + h * vv, um = uu - h * vv;
        const double dT = (sym.T(k, t + h, up, s) - sym.T(k, t - h, um, s)) / (2.0 * h);
        const Vec dL = (sym.L(k, t + h, up, s) - sym.L(k, t - h, um, s)) / (2.0 * h);
        if (!(std::fabs(dT) > 0.0)) {
          invariant = false;
          continue;
        }
        const double f1 = F.F(k, sym.T(k, t, uu, s), sym.L(k, t, uu, s), dL / dT) * dT;
        if (std::fabs(f1 - f0) > opt.invariance_tol * (1.0 + std::fabs(f0))) invariant = false;
      }
    }
  }
  if (!identity_ok) warnings.push_back("symmetry is not the identity at s = 0");
  if (!invariant) warnings.push_back("Lagrangian is not invariant under the symmetry on probes");

  const ElResidual el = el_residual(F, u);
  for (std::size_t k = u.gauge().tail_begin(); k < K; ++k) {
    if (el.max_norm[k] > opt.el_tol) {
      warnings.push_back("trajectory does not satisfy the Euler-Lagrange equation to tolerance");
      break;
    }
  }

  std::vector<Mat> charge(K, Mat(1, static_cast<Eigen::Index>(N)));
  GenNum drift = GenNum::constant(u.gauge_ptr(), 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < N; ++i) {
      const double t = u.t(k, i);
      const Vec uu = u.u(k, i), vv = u.v(k, i);
      const double dsT = fd::derivative([&](double s) { return sym.T(k, t, uu, s); }, 0.0, 1e-2);
      Vec dsL(uu.size());
      for (Eigen::Index c = 0; c < uu.size(); ++c) {
        dsL(c) = fd::derivative([&](double s) { return sym.L(k, t, uu, s)(c); }, 0.0, 1e-2);
      }
      const Vec p = F.Fv(k, t, uu, vv);
      charge[k](0, static_cast<Eigen::Index>(i)) = p.dot(dsL) + (F.F(k, t, uu, vv) - p.dot(vv)) * dsT;
    }
    drift[k] = (charge[k].array() - charge[k](0, 0)).abs().maxCoeff();
  }
  GsfFamily fam = sampled_family(u, charge);
  return {std::move(charge), std::move(drift), std::move(fam), invariant && identity_ok, std::move(warnings)};
}

}  // namespace gsfc
