#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gsfcalc/error.hpp"
#include "gsfcalc/gen_num.hpp"
#include "gsfcalc/gsf.hpp"
#include "gsfcalc/mollifier.hpp"
#include "gsfcalc/quadrature.hpp"

namespace gsfc {

/// Scale b of the embedding: ψ_ε^b(y) = b_ε ψ(b_ε y), with b ≥ dρ^{-a}.
class EmbeddingParams {
 public:
  EmbeddingParams(GenNum b, double a) : b_(std::move(b)), a_(a) {
    if (!(a_ > 0.0)) throw ConstructionError("embedding exponent a must be positive");
    if (gen_lt(GenNum::constant(b_.gauge_ptr(), 0.0), b_) != Truth::yes) {
      throw ConstructionError("embedding scale b must be strictly positive");
    }
    const AsymptoticReport rep = classify(b_);
    if (rep.verdict != Verdict::moderate) throw ConstructionError("embedding scale b must be moderate");
    if (!(rep.estimated_order < 0.0) || !(b_.last() > b_[b_.gauge().tail_begin()])) {
      throw ConstructionError("embedding scale b must be infinite");
    }
    for (std::size_t k = 0; k < b_.size(); ++k) {
      if (!(b_[k] > 0.0)) throw ConstructionError("embedding scale b must be positive at every level");
    }
  }

  /// b = d·ρ^{-a}.
  static EmbeddingParams power(const GaugePtr& g, double a = 1.0, double d = 1.0) {
    return {GenNum::from_index(g, [&](std::size_t k) { return d * g->rho_pow(k, -a); }), a};
  }

  const GenNum& b() const { return b_; }
  double b(std::size_t k) const { return b_[k]; }
  double a() const { return a_; }
  const GaugePtr& gauge_ptr() const { return b_.gauge_ptr(); }

 private:
  GenNum b_;
  double a_;
};

/// A compactly described distribution on ℝ: a finite linear combination of
/// derivatives of Dirac deltas, Heaviside steps and locally integrable
/// functions.
class Distribution {
 public:
  enum class Kind { dirac, heaviside, function };

  struct Term {
    double coef = 1.0;
    Kind kind = Kind::dirac;
    double x0 = 0.0;
    int order = 0;  // derivative order
    std::function<double(double)> f;
    std::vector<double> breakpoints;  // kinks or jumps of f, split for quadrature
  };

  static Distribution dirac(double x0 = 0.0) { return Distribution({Term{1.0, Kind::dirac, x0, 0, {}, {}}}); }
  static Distribution heaviside(double x0 = 0.0) { return Distribution({Term{1.0, Kind::heaviside, x0, 0, {}, {}}}); }
  static Distribution function(std::function<double(double)> f, std::vector<double> breakpoints = {}) {
    if (!f) throw ConstructionError("function distribution needs a callable");
    return Distribution({Term{1.0, Kind::function, 0.0, 0, std::move(f), std::move(breakpoints)}});
  }

  /// n-th distributional derivative.
  Distribution derivative(int n = 1) const {
    if (n < 0) throw PreconditionError("derivative order must be non-negative");
    Distribution r = *this;
    for (Term& t : r.terms_) t.order += n;
    return r;
  }

  Distribution& operator+=(const Distribution& o) {
    terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
    return *this;
  }
  Distribution& operator*=(double c) {
    for (Term& t : terms_) t.coef *= c;
    return *this;
  }
  friend Distribution operator+(Distribution a, const Distribution& b) { return a += b; }
  friend Distribution operator*(double c, Distribution a) { return a *= c; }

  const std::vector<Term>& terms() const { return terms_; }
  int max_order() const {
    int m = 0;
    for (const Term& t : terms_) m = std::max(m, t.order);
    return m;
  }

 private:
  explicit Distribution(std::vector<Term> t) : terms_(std::move(t)) {}
  std::vector<Term> terms_;
};

namespace detail {

/// ∫_{-1}^{1} g(z) dz split at the given interior points.
template <class G>
double split_integral(G&& g, std::vector<double> cuts, quad::Options opt = {}) {
  std::vector<double> pts{-1.0};
  std::sort(cuts.begin(), cuts.end());
  for (double c : cuts) {
    if (c > pts.back() && c < 1.0) pts.push_back(c);
  }
  pts.push_back(1.0);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += quad::integral(g, pts[i], pts[i + 1], opt);
  return s;
}

/// ∫|f| over [probe-1, probe+1] at 64, 256 and 1024 panels per segment.
/// Gauss nodes never land on a singularity, so divergence shows up as
/// increments that fail to shrink under refinement: ratio 4 for 1/x², 1 for
/// 1/|x|, but 1/2 for the integrable |x|^{-1/2}.
inline bool locally_integrable(const std::function<double(double)>& f, double probe, const std::vector<double>& breakpoints) {
  std::vector<double> pts{-1.0};
  std::vector<double> cuts;
  for (double p : breakpoints) cuts.push_back(p - probe);
  std::sort(cuts.begin(), cuts.end());
  for (double c : cuts)
    if (c > pts.back() && c < 1.0) pts.push_back(c);
  pts.push_back(1.0);
  double v[3];
  int panels = 64;
  for (double& vi : v) {
    vi = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      vi += quad::composite_gl([&](double z) { return std::fabs(f(probe + z)); }, pts[i], pts[i + 1], panels).first;
    }
    if (!std::isfinite(vi)) return false;
    panels *= 4;
  }
  const double d1 = std::fabs(v[1] - v[0]), d2 = std::fabs(v[2] - v[1]);
  return !(d2 > 0.75 * d1 && d2 > 1e-6 * std::max(1.0, v[2]));
}

/// n-th derivative of (T ∗ ψ_b) at x for a single term.
inline double embed_term(const Distribution::Term& t, const Mollifier& m, double b, double x, int extra) {
  const int n = t.order + extra;
  switch (t.kind) {
    case Distribution::Kind::dirac:
      return t.coef * std::pow(b, n + 1) * m.derivative(b * (x - t.x0), n);
    case Distribution::Kind::heaviside:
      if (n == 0) return t.coef * m.cumulative(b * (x - t.x0));
      return t.coef * std::pow(b, n) * m.derivative(b * (x - t.x0), n - 1);
    case Distribution::Kind::function: {
      std::vector<double> cuts;
      for (double p : t.breakpoints) cuts.push_back(b * (x - p));
      const double bn = std::pow(b, n);
      return t.coef * split_integral([&](double z) { return t.f(x - z / b) * bn * m.derivative(z, n); }, cuts);
    }
  }
  return 0.0;
}

}  // namespace detail

/// ι^b(T): the family x ↦ (T ∗ ψ_ε^b)(x), with partials by convolution with
/// kernel derivatives.
inline GsfFamily embed(const Distribution& T, const EmbeddingParams& params, const Mollifier& m) {
  if (T.terms().empty()) throw ConstructionError("empty distribution");
  auto mol = std::make_shared<const Mollifier>(m);
  auto terms = std::make_shared<const std::vector<Distribution::Term>>(T.terms());
  auto b = std::make_shared<const GenNum>(params.b());
  PartialEvaluator partial = [mol, terms, b](std::size_t k, const Vec& x, const MultiIndex& alpha) {
    double s = 0.0;
    for (const auto& t : *terms) s += detail::embed_term(t, *mol, (*b)[k], x(0), alpha[0]);
    return Vec::Constant(1, s);
  };
  Evaluator value = [partial](std::size_t k, const Vec& x) { return partial(k, x, MultiIndex{0}); };

  for (const auto& t : T.terms()) {
    if (t.kind != Distribution::Kind::function) continue;
    for (double probe : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      if (!detail::locally_integrable(t.f, probe, t.breakpoints)) {
        throw ConstructionError("function is not locally integrable on probes");
      }
    }
  }
  return GsfFamily(params.gauge_ptr(), 1, 1, value, partial);
}

/// Test function φ with derivative access φ^(n) and an effective support.
struct TestFunction {
  std::function<double(double x, int n)> eval;
  double lo = -12.0, hi = 12.0;

  double operator()(double x, int n = 0) const { return eval(x, n); }

  /// e^{-(x-c)²}·(polynomial factor) families used by the checks.
  static TestFunction gaussian(double center = 0.0) {
    return {[center](double x, int n) {
              // d^n/dx^n e^{-u²} = (-1)^n H_n(u) e^{-u²}, physicists' Hermite.
              const double u = x - center;
              double h0 = 1.0, h1 = 2.0 * u;
              double h = n == 0 ? h0 : h1;
              for (int i = 1; i < n; ++i) {
                h = 2.0 * u * h1 - 2.0 * i * h0;
                h0 = h1;
                h1 = h;
              }
              return (n % 2 ? -1.0 : 1.0) * h * std::exp(-u * u);
            },
            center - 12.0, center + 12.0};
  }

  /// x·e^{-x²}.
  static TestFunction x_gaussian() {
    const TestFunction g = gaussian();
    return {[g](double x, int n) { return x * g(x, n) + (n > 0 ? n * g(x, n - 1) : 0.0); }, -12.0, 12.0};
  }
};

struct WeakLimitReport {
  double exact = 0.0;       // ⟨T, φ⟩
  GenNum pairing;           // ∫ ι(T)_ε φ
  GenNum error;             // |∫ ι(T)_ε φ - ⟨T, φ⟩|
  double rate = 0.0;        // slope of log error against log ε on the tail
  bool decreasing_tail = false;  // strictly decreasing over the last five levels
  double final_error = 0.0;
};

namespace detail {

/// ⟨T_term, φ⟩ for the supported kinds.
inline double pairing_exact(const Distribution::Term& t, const TestFunction& phi, quad::Options opt = {}) {
  const double sgn = t.order % 2 ? -1.0 : 1.0;
  switch (t.kind) {
    case Distribution::Kind::dirac:
      return t.coef * sgn * phi(t.x0, t.order);
    case Distribution::Kind::heaviside:
      if (t.order == 0) return t.coef * quad::integral([&](double x) { return phi(x); }, t.x0, std::max(phi.hi, t.x0), opt);
      return t.coef * (t.order % 2 ? 1.0 : -1.0) * phi(t.x0, t.order - 1);
    case Distribution::Kind::function: {
      std::vector<double> pts{phi.lo};
      std::vector<double> bp = t.breakpoints;
      std::sort(bp.begin(), bp.end());
      for (double p : bp)
        if (p > phi.lo && p < phi.hi) pts.push_back(p);
      pts.push_back(phi.hi);
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        s += quad::integral([&](double y) { return t.f(y) * phi(y, t.order); }, pts[i], pts[i + 1], opt);
      return t.coef * sgn * s;
    }
  }
  return 0.0;
}

/// ∫ ι(T_term)_ε φ - ⟨T_term, φ⟩, written so that the cancellation happens
/// inside the integrand rather than between two large numbers.
inline double pairing_error(const Distribution::Term& t, const Mollifier& m, double b, const TestFunction& phi,
                            quad::Options opt = {}) {
  auto kernel_shift = [&](double y, int n) {
    // ∫ ψ(z) [φ^(n)(y + z/b) - φ^(n)(y)] dz; ψ has unit mass.
    const double base = phi(y, n);
    return bump_quad([&](double z) { return m(z) * (phi(y + z / b, n) - base); }, -1.0, 1.0, 64);
  };
  switch (t.kind) {
    case Distribution::Kind::dirac:
      return t.coef * (t.order % 2 ? -1.0 : 1.0) * kernel_shift(t.x0, t.order);
    case Distribution::Kind::heaviside: {
      if (t.order > 0) return t.coef * (t.order % 2 ? 1.0 : -1.0) * kernel_shift(t.x0, t.order - 1);
      auto g = [&](double z) { return (m.cumulative(z) - (z >= 0.0 ? 1.0 : 0.0)) * phi(t.x0 + z / b); };
      return t.coef / b * (bump_quad(g, -1.0, 0.0, 64) + bump_quad(g, 0.0, 1.0, 64));
    }
    case Distribution::Kind::function: {
      std::vector<double> pts{phi.lo};
      std::vector<double> bp = t.breakpoints;
      std::sort(bp.begin(), bp.end());
      for (double p : bp)
        if (p > phi.lo && p < phi.hi) pts.push_back(p);
      pts.push_back(phi.hi);
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        s += quad::integral([&](double y) { return t.f(y) * kernel_shift(y, t.order); }, pts[i], pts[i + 1], opt);
      return t.coef * (t.order % 2 ? -1.0 : 1.0) * s;
    }
  }
  return 0.0;
}

}  // namespace detail

/// Convergence of ∫ ι(T)_ε φ to ⟨T, φ⟩ over the grid.
inline WeakLimitReport weak_limit_check(const Distribution& T, const EmbeddingParams& params, const Mollifier& m,
                                        const TestFunction& phi, quad::Options opt = {}) {
  WeakLimitReport r{0.0, GenNum::constant(params.gauge_ptr(), 0.0), GenNum::constant(params.gauge_ptr(), 0.0)};
  for (const auto& t : T.terms()) r.exact += detail::pairing_exact(t, phi, opt);
  const Gauge& g = params.b().gauge();
  for (std::size_t k = 0; k < g.size(); ++k) {
    double e = 0.0;
    for (const auto& t : T.terms()) e += detail::pairing_error(t, m, params.b(k), phi, opt);
    r.error[k] = std::fabs(e);
    r.pairing[k] = r.exact + e;
  }
  const std::size_t n = g.size();
  r.final_error = r.error[n - 1];
  r.decreasing_tail = true;
  for (std::size_t k = n - 4; k < n; ++k) r.decreasing_tail = r.decreasing_tail && r.error[k] < r.error[k - 1];
  std::vector<double> xs, ys;
  for (std::size_t k = g.tail_begin(); k < n; ++k) {
    if (r.error[k] > 0.0) {
      xs.push_back(std::log(g.eps(k)));
      ys.push_back(std::log(r.error[k]));
    }
  }
  r.rate = detail::slope_fit(xs, ys).first;
  return r;
}

/// (r ⊙ f)(y) = f(y/r)/r: dilation preserving mass.
inline std::function<double(double)> dilate(double r, std::function<double(double)> f) {
  return [r, f = std::move(f)](double y) { return f(y / r) / r; };
}

/// (x ⊕ f)(y) = f(y - x).
inline std::function<double(double)> translate(double x, std::function<double(double)> f) {
  return [x, f = std::move(f)](double y) { return f(y - x); };
}

}  // namespace gsfc
