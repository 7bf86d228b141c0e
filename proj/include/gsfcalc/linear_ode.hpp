#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "gsfcalc/error.hpp"
#include "gsfcalc/gen_num.hpp"
#include "gsfcalc/gsf.hpp"
#include "gsfcalc/quadrature.hpp"

namespace gsfc {

namespace detail {

/// d×d matrix from a family with d² outputs in column-major order.
inline Mat as_matrix(const Vec& flat) {
  const auto d = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(flat.size()))));
  if (d * d != flat.size()) throw PreconditionError("matrix family must have d*d outputs");
  return Eigen::Map<const Mat>(flat.data(), d, d);
}

inline Mat eval_matrix(const GsfFamily& A, std::size_t k, double t) { return as_matrix(A.value(k, Vec::Constant(1, t))); }

/// ∫_{t_0}^{t_i} A for every node t_i of a uniform grid, one 16-point panel per cell.
inline std::vector<Mat> cumulative_integral(const GsfFamily& A, std::size_t k, double a, double b, std::size_t nodes) {
  const double h = (b - a) / static_cast<double>(nodes - 1);
  const auto& r = quad::GL16::get();
  std::vector<Mat> out;
  Mat acc = Mat::Zero(eval_matrix(A, k, a).rows(), eval_matrix(A, k, a).cols());
  out.push_back(acc);
  for (std::size_t i = 0; i + 1 < nodes; ++i) {
    const double mid = a + h * (static_cast<double>(i) + 0.5);
    for (int q = 0; q < 16; ++q) acc += 0.5 * h * r.w[q] * eval_matrix(A, k, mid + 0.5 * h * r.x[q]);
    out.push_back(acc);
  }
  return out;
}

}  // namespace detail

struct LogBoundReport {
  GenNum max_norm;  // max_t ‖∫_a^t A‖₂
  GenNum ratio;     // max_norm / (-log ρ)
  double C = 0.0;   // least-squares fit max_norm ≈ C·(-log ρ) on the tail
  double slope = 0.0;  // of log ratio against log(-log ρ) on the tail
  bool pass = false;
};

/// Checks ‖∫_a^t A‖ ≤ -C log ρ on the tail: the ratio to -log ρ may not grow
/// faster than (-log ρ)^0.5.
inline LogBoundReport log_bound_check(const GsfFamily& A, const IntervalDomain& dom, std::size_t nodes = 1025) {
  if (A.input_dim() != 1) throw PreconditionError("log_bound_check: A must be a function of time");
  const Gauge& g = A.gauge();
  GenNum M = GenNum::from_index(A.gauge_ptr(), [&](std::size_t k) {
    double m = 0.0;
    for (const Mat& I : detail::cumulative_integral(A, k, dom.a(k), dom.b(k), nodes)) {
      m = std::max(m, Eigen::JacobiSVD<Mat>(I).singularValues()(0));
    }
    return m;
  });
  LogBoundReport rep{M, M};
  double num = 0.0, den = 0.0;
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double L = -g.log_rho(k);
    rep.ratio[k] = L > 0.0 ? M[k] / L : std::numeric_limits<double>::infinity();
    if (k < g.tail_begin() || !(L > 0.0)) continue;
    num += M[k] * L;
    den += L * L;
    if (rep.ratio[k] > 0.0) {
      xs.push_back(std::log(L));
      ys.push_back(std::log(rep.ratio[k]));
    }
  }
  rep.C = den > 0.0 ? num / den : 0.0;
  rep.slope = xs.size() >= 2 ? detail::slope_fit(xs, ys).first : 0.0;
  rep.pass = den > 0.0 && std::isfinite(rep.C) && rep.slope <= 0.5;
  return rep;
}

struct LinearOdeSolution {
  std::vector<Mat> y;  // per level, d × nodes
  GenNum rk4_discrepancy;
  LogBoundReport bound;
};

/// y(t) = exp(∫_a^t A) y0 for pairwise commuting A(s), cross-checked by RK4
/// on y' = A y over the same nodes.
inline LinearOdeSolution matrix_exp_solution(const GsfFamily& A, const IntervalDomain& dom, const Vec& y0,
                                             std::size_t nodes = 1025, double commute_tol = 1e-10) {
  LogBoundReport bound = log_bound_check(A, dom, nodes);
  if (!bound.pass) throw PreconditionError("log bound check failed; the solution is not moderate");
  const std::size_t K = A.gauge().size();
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<Mat> probes;
    for (int i = 0; i <= 8; ++i) probes.push_back(detail::eval_matrix(A, k, dom.a(k) + (dom.b(k) - dom.a(k)) * i / 8.0));
    if (probes.front().rows() != y0.size()) throw PreconditionError("initial value has the wrong dimension");
    for (std::size_t i = 0; i < probes.size(); ++i) {
      for (std::size_t j = i + 1; j < probes.size(); ++j) {
        const Mat c = probes[i] * probes[j] - probes[j] * probes[i];
        const double scale = 1.0 + probes[i].norm() * probes[j].norm();
        if (c.norm() > commute_tol * scale) throw PreconditionError("exponential formula inapplicable; use direct solve");
      }
    }
  }
  LinearOdeSolution sol{std::vector<Mat>(K), GenNum::constant(A.gauge_ptr(), 0.0), std::move(bound)};
  for (std::size_t k = 0; k < K; ++k) {
    const double a = dom.a(k), b = dom.b(k);
    const double h = (b - a) / static_cast<double>(nodes - 1);
    const auto I = detail::cumulative_integral(A, k, a, b, nodes);
    Mat& Y = sol.y[k];
    Y.resize(y0.size(), static_cast<Eigen::Index>(nodes));
    for (std::size_t i = 0; i < nodes; ++i) Y.col(static_cast<Eigen::Index>(i)) = I[i].exp() * y0;
    Vec z = y0;
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < nodes; ++i) {
      const double t = a + h * static_cast<double>(i);
      const Mat A0 = detail::eval_matrix(A, k, t), A1 = detail::eval_matrix(A, k, t + 0.5 * h),
                A2 = detail::eval_matrix(A, k, t + h);
      const Vec k1 = A0 * z, k2 = A1 * (z + 0.5 * h * k1), k3 = A1 * (z + 0.5 * h * k2), k4 = A2 * (z + h * k3);
      z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      worst = std::max(worst, (z - Y.col(static_cast<Eigen::Index>(i + 1))).cwiseAbs().maxCoeff());
    }
    sol.rk4_discrepancy[k] = worst;
  }
  return sol;
}

}  // namespace gsfc
