#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gsfcalc/csv.hpp"
#include "gsfcalc/error.hpp"
#include "gsfcalc/quadrature.hpp"

namespace gsfc {

struct MollifierSpec {
  /// Moments 1..j vanish.
  int j = 0;
  /// Negative-part budget: ∫|ψ| ≤ 1 + eta.
  double eta = 1.0;
  /// Optional mass on (-∞, 0].
  std::optional<double> left_mass;
};

namespace detail {

/// Polynomials r_n with φ^(n)(x) = r_n(x)·φ(x)/(1-x²)^{2n} for the bump
/// φ(x) = exp(-1/(1-x²)). Coefficients in the monomial basis.
inline const std::vector<std::vector<double>>& bump_derivative_polys() {
  static const std::vector<std::vector<double>> polys = [] {
    constexpr int nmax = 10;
    std::vector<std::vector<double>> r{{1.0}};
    auto mul = [](const std::vector<double>& a, const std::vector<double>& b) {
      std::vector<double> c(a.size() + b.size() - 1, 0.0);
      for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
      return c;
    };
    auto add = [](std::vector<double> a, const std::vector<double>& b) {
      if (a.size() < b.size()) a.resize(b.size(), 0.0);
      for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
      return a;
    };
    const std::vector<double> w2{1.0, 0.0, -2.0, 0.0, 1.0};  // (1-x²)²
    for (int n = 0; n < nmax; ++n) {
      const auto& rn = r.back();
      std::vector<double> drn(std::max<std::size_t>(rn.size() - 1, 1), 0.0);
      for (std::size_t i = 1; i < rn.size(); ++i) drn[i - 1] = static_cast<double>(i) * rn[i];
      auto next = mul(drn, w2);
      next = add(next, mul(rn, {0.0, -2.0}));
      next = add(next, mul(rn, {0.0, 4.0 * n, 0.0, -4.0 * n}));
      r.push_back(next);
    }
    return r;
  }();
  return polys;
}

inline double horner(const std::vector<double>& c, double x) {
  double s = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) s = s * x + c[i];
  return s;
}

/// n-th derivative of exp(-1/(1-x²)), zero outside (-1,1).
inline double bump_derivative(double x, int n) {
  if (!(std::fabs(x) < 1.0)) return 0.0;
  const auto& polys = bump_derivative_polys();
  if (n >= static_cast<int>(polys.size())) throw PreconditionError("bump derivative order too high");
  const double w = 1.0 - x * x;
  return horner(polys[static_cast<std::size_t>(n)], x) * std::exp(-1.0 / w - 2.0 * n * std::log(w));
}

/// Legendre polynomials P_0..P_deg at x.
inline std::vector<double> legendre_values(int deg, double x) {
  std::vector<double> p(static_cast<std::size_t>(deg) + 1);
  p[0] = 1.0;
  if (deg >= 1) p[1] = x;
  for (int n = 1; n < deg; ++n) p[n + 1] = ((2.0 * n + 1.0) * x * p[n] - n * p[n - 1]) / (n + 1.0);
  return p;
}

/// Monomial coefficients of P_0..P_deg.
inline std::vector<std::vector<double>> legendre_monomials(int deg) {
  std::vector<std::vector<double>> P(static_cast<std::size_t>(deg) + 1, std::vector<double>(deg + 1, 0.0));
  P[0][0] = 1.0;
  if (deg >= 1) P[1][1] = 1.0;
  for (int n = 1; n < deg; ++n) {
    for (int i = 0; i <= deg; ++i) {
      double v = -n * P[n - 1][i];
      if (i > 0) v += (2.0 * n + 1.0) * P[n][i - 1];
      P[n + 1][i] = v / (n + 1.0);
    }
  }
  return P;
}

/// Fixed composite Gauss–Legendre over [lo, hi]; the bump is flat at ±1,
/// so 64 panels reach roundoff.
template <class F>
double bump_quad(F&& f, double lo, double hi, int panels = 64) {
  return quad::composite_gl(f, lo, hi, panels).first;
}

}  // namespace detail

/// Compactly supported kernel ψ = p·φ on [-1,1] with unit mass and vanishing
/// moments of order 1..j.
class Mollifier {
 public:
  const MollifierSpec& spec() const { return spec_; }
  int degree() const { return static_cast<int>(coef_.size()) - 1; }
  /// Monomial coefficients of p.
  const std::vector<double>& coefficients() const { return coef_; }
  /// 2-norm condition number of the moment system.
  double condition_number() const { return cond_; }

  double operator()(double x) const { return derivative(x, 0); }

  /// ψ^(n)(x) by Leibniz on p·φ.
  double derivative(double x, int n) const {
    if (!(std::fabs(x) < 1.0)) return 0.0;
    double s = 0.0, binom = 1.0;
    for (int i = 0; i <= n; ++i) {
      if (i > 0) binom = binom * (n - i + 1) / i;
      const double dp = poly_derivative(x, i);
      if (dp != 0.0) s += binom * dp * detail::bump_derivative(x, n - i) / norm_;
    }
    return s;
  }

  /// Ψ(x) = ∫_{-1}^x ψ.
  double cumulative(double x) const {
    if (x <= -1.0) return 0.0;
    if (x >= 1.0) return cum_.back();
    const double u = (x + 1.0) * kCumScale;
    const std::size_t i = std::min(static_cast<std::size_t>(u), cum_.size() - 2);
    const double xi = -1.0 + static_cast<double>(i) / kCumScale;
    return cum_[i] + quad::composite_gl([this](double s) { return (*this)(s); }, xi, x, 1).first;
  }

  friend Mollifier build_mollifier(const MollifierSpec& spec);

 private:
  static constexpr double kCumScale = 64.0;

  double poly_derivative(double x, int i) const {
    double s = 0.0;
    for (std::size_t m = coef_.size(); m-- > static_cast<std::size_t>(i);) {
      double f = 1.0;
      for (int r = 0; r < i; ++r) f *= static_cast<double>(m - static_cast<std::size_t>(r));
      s = s * x + f * coef_[m];
    }
    return s;
  }

  MollifierSpec spec_;
  std::vector<double> coef_;
  double norm_ = 1.0;  // ∫φ, so that φ/norm_ has unit mass
  double cond_ = 1.0;
  std::vector<double> cum_;
};

/// Solves the moment system in the Legendre basis (∫P_α ψ = P_α(0), which is
/// equivalent to unit mass plus vanishing moments) and checks the budget.
namespace detail {

/// Zeros of ψ in (-1,1), bracketed on a fine grid and refined by bisection.
/// |ψ| has kinks there, so ∫|ψ| is split at these points.
template <class M>
std::vector<double> sign_changes(const M& m) {
  std::vector<double> roots;
  constexpr int n = 2000;
  double x0 = -1.0 + 1.0 / n, f0 = m(x0);
  for (int i = 2; i < 2 * n; ++i) {
    const double x1 = -1.0 + static_cast<double>(i) / n, f1 = m(x1);
    if ((f0 < 0.0) != (f1 < 0.0) && f0 != 0.0 && f1 != 0.0) {
      double lo = x0, hi = x1;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((m(mid) < 0.0) == (f0 < 0.0) ? lo : hi) = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    x0 = x1;
    f0 = f1;
  }
  return roots;
}

template <class M>
double abs_mass(const M& m, int panels = 64) {
  std::vector<double> pts{-1.0};
  for (double r : sign_changes(m)) pts.push_back(r);
  pts.push_back(1.0);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    s += std::fabs(bump_quad([&m](double x) { return m(x); }, pts[i], pts[i + 1], panels));
  }
  return s;
}

}  // namespace detail

inline Mollifier build_mollifier(const MollifierSpec& spec) {
  if (spec.j < 0 || spec.j > 12) throw ConstructionError("moment order must lie in 0..12");
  if (!(spec.eta > 0.0)) throw ConstructionError("negative-part budget must be positive");
  if (spec.left_mass && !(*spec.left_mass > 0.0 && *spec.left_mass < 1.0)) {
    throw ConstructionError("left mass must lie in (0,1)");
  }
  Mollifier m;
  m.spec_ = spec;
  m.norm_ = detail::bump_quad([](double x) { return detail::bump_derivative(x, 0); }, -1.0, 1.0);
  // With a left-mass row and odd j the odd part of the system is rank
  // deficient for a symmetric bump; one more vanishing moment restores it.
  const int jm = spec.left_mass && spec.j % 2 == 1 ? spec.j + 1 : spec.j;
  const int deg = jm + (spec.left_mass ? 1 : 0);
  const int rows = deg + 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, rows);
  Eigen::VectorXd rhs(rows);
  const auto p0 = detail::legendre_values(deg, 0.0);
  for (int a = 0; a <= jm; ++a) {
    for (int i = 0; i <= deg; ++i) {
      A(a, i) = detail::bump_quad(
          [&](double x) {
            const auto p = detail::legendre_values(deg, x);
            return p[a] * p[i] * detail::bump_derivative(x, 0) / m.norm_;
          },
          -1.0, 1.0);
    }
    rhs(a) = p0[a];
  }
  if (spec.left_mass) {
    for (int i = 0; i <= deg; ++i) {
      A(rows - 1, i) = detail::bump_quad(
          [&](double x) { return detail::legendre_values(deg, x)[i] * detail::bump_derivative(x, 0) / m.norm_; }, -1.0,
          0.0);
    }
    rhs(rows - 1) = *spec.left_mass;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  m.cond_ = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(m.cond_ < 1e12)) throw ConstructionError("moment system is singular or ill-conditioned");
  const Eigen::VectorXd c = svd.solve(rhs);

  const auto P = detail::legendre_monomials(deg);
  m.coef_.assign(static_cast<std::size_t>(deg) + 1, 0.0);
  for (int i = 0; i <= deg; ++i)
    for (int p = 0; p <= deg; ++p) m.coef_[p] += c(i) * P[i][p];

  const std::size_t cells = static_cast<std::size_t>(2.0 * Mollifier::kCumScale);
  m.cum_.assign(cells + 1, 0.0);
  for (std::size_t i = 0; i < cells; ++i) {
    const double lo = -1.0 + static_cast<double>(i) / Mollifier::kCumScale;
    m.cum_[i + 1] = m.cum_[i] + quad::composite_gl([&m](double s) { return m(s); }, lo, lo + 1.0 / Mollifier::kCumScale, 1).first;
  }

  const double abs_mass = detail::abs_mass(m);
  if (abs_mass > 1.0 + spec.eta) throw ConstructionError("negative-part budget exceeded");
  return m;
}

struct MomentReport {
  double mass_error = 0.0;            // |∫ψ - 1|
  double max_moment_violation = 0.0;  // max_{1≤α≤j} |∫x^α ψ|
  double abs_mass = 0.0;              // ∫|ψ|
  bool within_budget = true;
  std::optional<double> left_mass_error;
  double support_violation = 0.0;  // max |ψ| sampled outside (-1,1)
};

/// Quadrature check of every kernel invariant.
inline MomentReport verify_moments(const Mollifier& m) {
  MomentReport r;
  auto q = [](auto&& f, double lo, double hi) { return detail::bump_quad(f, lo, hi, 128); };
  r.mass_error = std::fabs(q([&](double x) { return m(x); }, -1.0, 1.0) - 1.0);
  for (int a = 1; a <= m.spec().j; ++a) {
    const double mom = q([&](double x) { return std::pow(x, a) * m(x); }, -1.0, 1.0);
    r.max_moment_violation = std::max(r.max_moment_violation, std::fabs(mom));
  }
  r.abs_mass = detail::abs_mass(m, 128);
  r.within_budget = r.abs_mass <= 1.0 + m.spec().eta;
  if (m.spec().left_mass) r.left_mass_error = std::fabs(q([&](double x) { return m(x); }, -1.0, 0.0) - *m.spec().left_mass);
  for (int i = 0; i <= 200; ++i) {
    const double x = 1.0 + 0.01 * i;
    r.support_violation = std::max({r.support_violation, std::fabs(m(x)), std::fabs(m(-x))});
  }
  return r;
}

/// Kernel samples as CSV (x, psi).
inline void write_kernel_csv(std::ostream& os, const Mollifier& m, std::size_t samples = 401) {
  csv::write_row(os, {"x", "psi"});
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(samples - 1);
    csv::write_row(os, {csv::num(x), csv::num(m(x))});
  }
}

}  // namespace gsfc
