#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gsfcalc/error.hpp"
#include "gsfcalc/finite_diff.hpp"
#include "gsfcalc/gen_num.hpp"
#include "gsfcalc/quadrature.hpp"

namespace gsfc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using MultiIndex = std::vector<int>;

/// f_ε evaluated at grid level k.
using Evaluator = std::function<Vec(std::size_t k, const Vec& x)>;
/// ∂^α f_ε evaluated at grid level k.
using PartialEvaluator = std::function<Vec(std::size_t k, const Vec& x, const MultiIndex& alpha)>;

/// Closed interval [a,b] of generalized numbers with a_ε < b_ε at every level.
class IntervalDomain {
 public:
  IntervalDomain(GenNum a, GenNum b) : a_(std::move(a)), b_(std::move(b)) {
    a_.require_same_gauge(b_);
    for (std::size_t k = 0; k < a_.size(); ++k) {
      if (!(a_[k] < b_[k])) throw ConstructionError("interval needs a_eps < b_eps at every level");
    }
    if (gen_lt(a_, b_) != Truth::yes) throw ConstructionError("interval needs a < b in the sharp order");
  }
  static IntervalDomain constant(const GaugePtr& g, double a, double b) {
    return {GenNum::constant(g, a), GenNum::constant(g, b)};
  }

  const GenNum& a() const { return a_; }
  const GenNum& b() const { return b_; }
  double a(std::size_t k) const { return a_[k]; }
  double b(std::size_t k) const { return b_[k]; }
  const GaugePtr& gauge_ptr() const { return a_.gauge_ptr(); }

 private:
  GenNum a_, b_;
};

/// Box ∏[lo_i, hi_i] with generalized endpoints.
struct BoxDomain {
  GenVec lo, hi;
};

/// A generalized smooth function: an ε-indexed family of smooth maps
/// ℝ^n → ℝ^d with evaluator and (analytic or finite-difference) partials.
class GsfFamily {
 public:
  GsfFamily(GaugePtr gauge, int n, int d, Evaluator f, PartialEvaluator partial = {},
            std::optional<BoxDomain> domain = std::nullopt)
      : gauge_(std::move(gauge)), n_(n), d_(d), f_(std::move(f)), partial_(std::move(partial)),
        domain_(std::move(domain)) {
    if (n_ < 1 || d_ < 1) throw ConstructionError("GSF dimensions must be positive");
    if (!f_) throw ConstructionError("GSF needs an evaluator");
    if (domain_ && (domain_->lo.size() != static_cast<std::size_t>(n_) || domain_->hi.size() != domain_->lo.size())) {
      throw ConstructionError("domain box dimension differs from input dimension");
    }
  }

  const GaugePtr& gauge_ptr() const { return gauge_; }
  const Gauge& gauge() const { return *gauge_; }
  int input_dim() const { return n_; }
  int output_dim() const { return d_; }
  bool has_analytic_partials() const { return static_cast<bool>(partial_); }
  const std::optional<BoxDomain>& domain() const { return domain_; }

  Vec value(std::size_t k, const Vec& x) const { return f_(k, x); }
  double value(std::size_t k, double x) const { return f_(k, Vec::Constant(1, x))(0); }

  /// ∂^α f_ε(x); nested Ridders differences when no analytic partials exist.
  Vec partial(std::size_t k, const Vec& x, const MultiIndex& alpha) const {
    int order = 0;
    for (int a : alpha) order += a;
    if (order == 0) return value(k, x);
    if (partial_) return partial_(k, x, alpha);
    std::size_t i = 0;
    while (alpha[i] == 0) ++i;
    MultiIndex lower = alpha;
    --lower[i];
    const double h0 = fd::gauge_step(gauge_->log_rho(k), x(static_cast<Eigen::Index>(i)));
    Vec out(d_);
    for (int c = 0; c < d_; ++c) {
      auto g = [&](double s) {
        Vec y = x;
        y(static_cast<Eigen::Index>(i)) += s;
        return partial(k, y, lower)(c);
      };
      out(c) = fd::derivative(g, 0.0, h0);
    }
    return out;
  }

  bool contains(std::size_t k, const Vec& x, double tol = 1e-12) const {
    if (!domain_) return true;
    for (int i = 0; i < n_; ++i) {
      const double lo = domain_->lo[i][k], hi = domain_->hi[i][k];
      const double t = tol * (1.0 + std::max(std::fabs(lo), std::fabs(hi)));
      if (x(i) < lo - t || x(i) > hi + t) return false;
    }
    return true;
  }

 private:
  GaugePtr gauge_;
  int n_, d_;
  Evaluator f_;
  PartialEvaluator partial_;
  std::optional<BoxDomain> domain_;
};

struct ValidationOptions {
  int random_probes = 8;
  unsigned seed = 42;
  int derivative_orders = 2;
};

namespace detail {

inline MultiIndex axis(int n, int i, int order) {
  MultiIndex a(static_cast<std::size_t>(n), 0);
  a[static_cast<std::size_t>(i)] = order;
  return a;
}

/// Probe points in unit-box coordinates: corners, midpoint, random interior points.
inline std::vector<Vec> unit_probes(int n, const ValidationOptions& opt) {
  std::vector<Vec> u;
  const int corners = n <= 4 ? (1 << n) : 0;
  for (int c = 0; c < corners; ++c) {
    Vec p(n);
    for (int i = 0; i < n; ++i) p(i) = (c >> i) & 1 ? 1.0 : 0.0;
    u.push_back(p);
  }
  u.push_back(Vec::Constant(n, 0.5));
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int r = 0; r < opt.random_probes; ++r) {
    Vec p(n);
    for (int i = 0; i < n; ++i) p(i) = U(rng);
    u.push_back(p);
  }
  return u;
}

inline Vec probe_at(const GsfFamily& f, std::size_t k, const Vec& unit) {
  Vec x(unit.size());
  for (Eigen::Index i = 0; i < unit.size(); ++i) {
    if (f.domain()) {
      const double lo = f.domain()->lo[static_cast<std::size_t>(i)][k];
      const double hi = f.domain()->hi[static_cast<std::size_t>(i)][k];
      x(i) = lo + unit(i) * (hi - lo);
    } else {
      x(i) = -1.0 + 2.0 * unit(i);
    }
  }
  return x;
}

}  // namespace detail

/// Builds a GSF and checks ρ-moderateness of the value and of the first
/// `derivative_orders` coordinate derivatives on a probe set.
inline GsfFamily make_gsf(GaugePtr gauge, int n, int d, Evaluator f, PartialEvaluator partial = {},
                          std::optional<BoxDomain> domain = std::nullopt, ValidationOptions opt = {}) {
  GsfFamily fam(std::move(gauge), n, d, std::move(f), std::move(partial), std::move(domain));
  const std::size_t K = fam.gauge().size();
  for (const Vec& u : detail::unit_probes(n, opt)) {
    for (int order = 0; order <= opt.derivative_orders; ++order) {
      for (int i = 0; i < (order == 0 ? 1 : n); ++i) {
        const MultiIndex alpha = detail::axis(n, i, order);
        std::vector<Vec> vals(K);
        for (std::size_t k = 0; k < K; ++k) vals[k] = fam.partial(k, detail::probe_at(fam, k, u), alpha);
        for (int c = 0; c < d; ++c) {
          GenNum g = GenNum::from_index(fam.gauge_ptr(), [&](std::size_t k) { return vals[k](c); });
          if (classify(g).verdict == Verdict::neither) {
            throw ConstructionError("not rho-moderate on probes (derivative order " + std::to_string(order) +
                                    ", component " + std::to_string(c) + ")");
          }
        }
      }
    }
  }
  return fam;
}

/// [f_ε(x_ε)] for a point of generalized numbers.
inline GenVec evaluate(const GsfFamily& f, const GenVec& x) {
  if (x.size() != static_cast<std::size_t>(f.input_dim())) throw PreconditionError("evaluate: wrong point dimension");
  const Gauge& g = f.gauge();
  for (const GenNum& xi : x) {
    if (!g.same_as(xi.gauge())) throw GaugeMismatch();
  }
  const std::size_t K = g.size();
  std::vector<Vec> vals(K);
  for (std::size_t k = 0; k < K; ++k) {
    Vec p(f.input_dim());
    for (int i = 0; i < f.input_dim(); ++i) p(i) = x[static_cast<std::size_t>(i)][k];
    if (k >= g.tail_begin() && !f.contains(k, p)) throw DomainError("evaluate: point outside the domain");
    vals[k] = f.value(k, p);
  }
  GenVec out;
  for (int c = 0; c < f.output_dim(); ++c) {
    out.push_back(GenNum::from_index(f.gauge_ptr(), [&](std::size_t k) { return vals[k](c); }));
  }
  return out;
}

inline GenNum evaluate(const GsfFamily& f, const GenNum& x) { return evaluate(f, GenVec{x}).front(); }

/// One directional derivative ∂_v f as a new family.
inline GsfFamily directional_derivative(const GsfFamily& f, const GenVec& v) {
  const int n = f.input_dim();
  if (v.size() != static_cast<std::size_t>(n)) throw PreconditionError("derivative: direction has wrong dimension");
  const std::size_t K = f.gauge().size();
  auto dirs = std::make_shared<std::vector<Vec>>(K, Vec(n));
  for (std::size_t k = 0; k < K; ++k) {
    for (int i = 0; i < n; ++i) (*dirs)[k](i) = v[static_cast<std::size_t>(i)][k];
  }
  auto base = std::make_shared<const GsfFamily>(f);
  if (f.has_analytic_partials()) {
    PartialEvaluator p = [base, dirs, n](std::size_t k, const Vec& x, const MultiIndex& beta) {
      Vec s = Vec::Zero(base->output_dim());
      const Vec& dir = (*dirs)[k];
      for (int i = 0; i < n; ++i) {
        if (dir(i) == 0.0) continue;
        MultiIndex b = beta;
        ++b[static_cast<std::size_t>(i)];
        s += dir(i) * base->partial(k, x, b);
      }
      return s;
    };
    Evaluator e = [p, n](std::size_t k, const Vec& x) { return p(k, x, MultiIndex(static_cast<std::size_t>(n), 0)); };
    return GsfFamily(f.gauge_ptr(), n, f.output_dim(), e, p, f.domain());
  }
  Evaluator e = [base, dirs](std::size_t k, const Vec& x) {
    const Vec& dir = (*dirs)[k];
    const double vn = std::max(dir.cwiseAbs().maxCoeff(), 1e-300);
    const double h0 = fd::gauge_step(base->gauge().log_rho(k), x.cwiseAbs().maxCoeff()) / vn;
    Vec out(base->output_dim());
    for (int c = 0; c < base->output_dim(); ++c) {
      out(c) = fd::derivative([&](double s) { return base->value(k, Vec(x + s * dir))(c); }, 0.0, h0);
    }
    return out;
  };
  return GsfFamily(f.gauge_ptr(), n, f.output_dim(), e, {}, f.domain());
}

/// j-th iterated directional derivative along v.
inline GsfFamily derivative(const GsfFamily& f, const GenVec& v, int order = 1) {
  GsfFamily r = f;
  for (int j = 0; j < order; ++j) r = directional_derivative(r, v);
  return r;
}

/// Derivative of a one-variable family.
inline GsfFamily derivative(const GsfFamily& f, int order = 1) {
  return derivative(f, GenVec{GenNum::constant(f.gauge_ptr(), 1.0)}, order);
}

/// [∫_{c_ε}^{x_ε} f_ε(s) ds] for a one-variable family, per-ε adaptive Gauss–Legendre.
inline GenNum integrate(const GsfFamily& f, const GenNum& c, const GenNum& x, int component = 0,
                        quad::Options opt = {}) {
  if (f.input_dim() != 1) throw PreconditionError("integrate: family must have one input");
  c.require_same_gauge(x);
  if (!f.gauge().same_as(c.gauge())) throw GaugeMismatch();
  const Gauge& g = f.gauge();
  return GenNum::from_index(f.gauge_ptr(), [&](std::size_t k) {
    if (k >= g.tail_begin() && (!f.contains(k, Vec::Constant(1, c[k])) || !f.contains(k, Vec::Constant(1, x[k])))) {
      throw DomainError("integrate: interval outside the domain");
    }
    return quad::integral([&](double s) { return f.value(k, Vec::Constant(1, s))(component); }, c[k], x[k], opt);
  });
}

namespace detail {

inline double node(const IntervalDomain& dom, std::size_t k, std::size_t i, std::size_t nodes) {
  return dom.a(k) + (dom.b(k) - dom.a(k)) * static_cast<double>(i) / static_cast<double>(nodes - 1);
}

}  // namespace detail

/// ‖f‖_m = max over derivative orders ≤ m, components and t ∈ [a,b] of |f^(n)(t)|,
/// sampled on a uniform grid.
inline GenNum norm_m(const GsfFamily& f, const IntervalDomain& dom, int m, std::size_t nodes = 1025) {
  if (f.input_dim() != 1) throw PreconditionError("norm_m: family must have one input");
  std::vector<GsfFamily> ders{f};
  for (int j = 1; j <= m; ++j) ders.push_back(derivative(ders.back()));
  return GenNum::from_index(f.gauge_ptr(), [&](std::size_t k) {
    double best = 0.0;
    for (const auto& D : ders) {
      for (std::size_t i = 0; i < nodes; ++i) {
        best = std::max(best, D.value(k, Vec::Constant(1, detail::node(dom, k, i, nodes))).cwiseAbs().maxCoeff());
      }
    }
    return best;
  });
}

struct Extremum {
  GenNum min, argmin, max, argmax;
};

namespace detail {

/// Golden-section search for the minimum of f on [lo, hi].
template <class F>
std::pair<double, double> golden_min(F&& f, double lo, double hi, int iters = 80) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters && hi - lo > 1e-15 * (1.0 + std::fabs(lo)); ++i) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - r * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + r * (hi - lo);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

}  // namespace detail

/// Global minimum and maximum per ε: dense scan plus golden-section polish
/// around the best node. Heuristic for pathological families.
inline Extremum extremum(const GsfFamily& f, const IntervalDomain& dom, std::size_t samples = 1025,
                         int component = 0) {
  if (f.input_dim() != 1) throw PreconditionError("extremum: family must have one input");
  const std::size_t K = f.gauge().size();
  std::vector<double> mn(K), amn(K), mx(K), amx(K);
  for (std::size_t k = 0; k < K; ++k) {
    auto val = [&](double t) { return f.value(k, Vec::Constant(1, t))(component); };
    std::vector<double> ts(samples), vs(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      ts[i] = detail::node(dom, k, i, samples);
      vs[i] = val(ts[i]);
    }
    auto polish = [&](double sign, double& best, double& arg) {
      std::size_t bi = 0;
      for (std::size_t i = 1; i < samples; ++i) {
        if (sign * vs[i] < sign * vs[bi]) bi = i;
      }
      best = vs[bi];
      arg = ts[bi];
      const double lo = ts[bi == 0 ? 0 : bi - 1], hi = ts[std::min(bi + 1, samples - 1)];
      auto [x, v] = detail::golden_min([&](double t) { return sign * val(t); }, lo, hi);
      if (v < sign * best) {
        best = sign * v;
        arg = x;
      }
    };
    polish(1.0, mn[k], amn[k]);
    polish(-1.0, mx[k], amx[k]);
  }
  const GaugePtr& g = f.gauge_ptr();
  return {GenNum(g, mn), GenNum(g, amn), GenNum(g, mx), GenNum(g, amx)};
}

struct TaylorRemainder {
  GenNum remainder;
  /// Valuation of the remainder and the lower bound (n+1)·ν(x-a) - growth,
  /// where growth is the blow-up order of the (n+1)-th derivative at a.
  double valuation = 0.0;
  double expected_valuation = 0.0;
  bool order_consistent = true;
};

/// f(x) - Σ_{j≤n} f^(j)(a)(x-a)^j/j! for a one-variable family.
inline TaylorRemainder taylor_remainder(const GsfFamily& f, const GenNum& a, const GenNum& x, int n) {
  if (f.input_dim() != 1) throw PreconditionError("taylor_remainder: family must have one input");
  a.require_same_gauge(x);
  const Gauge& g = f.gauge();
  for (std::size_t k = g.tail_begin(); k < g.size(); ++k) {
    if (!f.contains(k, Vec::Constant(1, a[k])) || !f.contains(k, Vec::Constant(1, x[k]))) {
      throw DomainError("taylor_remainder: segment outside the domain");
    }
  }
  std::vector<GsfFamily> ders{f};
  for (int j = 1; j <= n + 1; ++j) ders.push_back(derivative(ders.back()));
  GenNum rem = evaluate(f, x);
  const GenNum h = x - a;
  GenNum hp = GenNum::constant(f.gauge_ptr(), 1.0);
  double fact = 1.0;
  for (int j = 0; j <= n; ++j) {
    if (j > 0) {
      hp *= h;
      fact *= j;
    }
    rem -= evaluate(ders[static_cast<std::size_t>(j)], a) * hp * (1.0 / fact);
  }
  TaylorRemainder out{rem};
  out.valuation = valuation(rem).nu;
  const double nu_h = valuation(h).nu;
  const double nu_d = valuation(evaluate(ders.back(), a)).nu;
  const double growth = std::isfinite(nu_d) ? std::max(0.0, -nu_d) : 0.0;
  out.expected_valuation = (n + 1) * nu_h - growth;
  out.order_consistent = !(out.valuation < out.expected_valuation - AsymptoticPolicy::slack);
  return out;
}

}  // namespace gsfc
