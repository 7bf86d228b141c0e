#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gsfcalc/gen_num.hpp"
#include "gsfcalc/jacobi.hpp"
#include "gsfcalc/lagrangian.hpp"
#include "gsfcalc/trajectory.hpp"
#include "gsfcalc/varcalc.hpp"

namespace gsfc {

enum class MinimizerVerdict { violates_necessary, passes_necessary, jacobi_obstruction };

inline const char* to_string(MinimizerVerdict v) {
  switch (v) {
    case MinimizerVerdict::violates_necessary: return "violates-necessary";
    case MinimizerVerdict::passes_necessary: return "passes-necessary";
    case MinimizerVerdict::jacobi_obstruction: return "jacobi-obstruction";
  }
  return "?";
}

struct MinimizerOptions {
  /// Bound on max |F_u - d/dt F_v| over the tail.
  double el_tol = 1e-6;
  int modes = 8;
  /// Conjugate parameters closer than this fraction of b - a to b count as the endpoint.
  double endpoint_margin = 1e-8;
};

struct MinimizerReport {
  GenNum el_norm;
  bool el_ok = false;
  LegendreReport legendre;
  JacobiSolution jacobi;
  ConjugateReport conjugate;
  /// Aggregated conjugate parameters lying in (a, b) on the whole tail.
  std::vector<GenNum> interior_conjugate;
  /// δ²I on the mode basis (component-major, m = 1..modes).
  std::vector<GenNum> mode_values;
  /// Index into mode_values of the most negative mode, if any mode is negative on the tail.
  std::optional<std::size_t> negative_mode;
  /// Accessory integral of the broken Jacobi field when a conjugate point exists.
  std::optional<GenNum> broken_accessory;
  bool positive_on_basis = false;
  MinimizerVerdict verdict = MinimizerVerdict::violates_necessary;
  std::string summary;
};

namespace detail {

inline bool tail_all(const GenNum& x, auto pred) {
  for (std::size_t k = x.gauge().tail_begin(); k < x.size(); ++k) {
    if (!pred(x[k], k)) return false;
  }
  return true;
}

}  // namespace detail

/// Necessary-condition evidence for a local minimizer: Euler–Lagrange
/// residual, Legendre condition, conjugate points and the sign of the second
/// variation on a sinusoidal basis.
inline MinimizerReport minimizer_report(const Lagrangian& F, const Trajectory& u, const MinimizerOptions& opt = {}) {
  const ElResidual el = el_residual(F, u);
  LegendreReport leg = legendre_check(F, u);
  JacobiSolution jac = jacobi_solve(F, u);
  ConjugateReport conj = conjugate_points(jac);
  MinimizerReport rep{el.max_norm,     false, std::move(leg), std::move(jac), std::move(conj), {}, {}, std::nullopt,
                      std::nullopt, false, MinimizerVerdict::violates_necessary, {}};
  rep.el_ok = detail::tail_all(rep.el_norm, [&](double v, std::size_t) { return v <= opt.el_tol; });

  const IntervalDomain& dom = u.domain();
  for (const GenNum& c : rep.conjugate.points) {
    const bool interior = detail::tail_all(c, [&](double v, std::size_t k) {
      return v < dom.b(k) - opt.endpoint_margin * (dom.b(k) - dom.a(k));
    });
    if (interior) rep.interior_conjugate.push_back(c);
  }

  double most_negative = 0.0;
  bool all_positive = true;
  const auto basis = mode_basis(u, opt.modes);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    GenNum v = second_variation(F, u, basis[i]);
    const bool negative = detail::tail_all(v, [](double x, std::size_t) { return x < 0.0; });
    all_positive = all_positive && detail::tail_all(v, [](double x, std::size_t) { return x > 0.0; });
    if (negative && v.last() < most_negative) {
      most_negative = v.last();
      rep.negative_mode = i;
    }
    rep.mode_values.push_back(std::move(v));
  }
  rep.positive_on_basis = all_positive;
  if (!rep.jacobi.roots[u.gauge().size() - 1].empty()) rep.broken_accessory = broken_accessory_integral(F, rep.jacobi);

  if (!rep.el_ok) {
    rep.verdict = MinimizerVerdict::violates_necessary;
    rep.summary = "Euler-Lagrange residual above tolerance";
  } else if (!rep.legendre.pass) {
    rep.verdict = MinimizerVerdict::violates_necessary;
    rep.summary = "Legendre condition fails";
  } else if (!rep.interior_conjugate.empty()) {
    rep.verdict = MinimizerVerdict::jacobi_obstruction;
    rep.summary = "conjugate point inside the interval";
  } else if (rep.negative_mode) {
    rep.verdict = MinimizerVerdict::violates_necessary;
    rep.summary = "second variation negative on a test field";
  } else {
    rep.verdict = MinimizerVerdict::passes_necessary;
    rep.summary = rep.positive_on_basis ? "necessary conditions hold; second variation positive on the basis"
                                        : "necessary conditions hold";
  }
  return rep;
}

}  // namespace gsfc
