#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsfcalc/error.hpp"
#include "gsfcalc/gauge.hpp"

namespace gsfc {

/// A generalized number: one real sample per ε of the gauge's grid.
///
/// Arithmetic is exact and componentwise; the asymptotic meaning of a value
/// (moderate, negligible, order, limit) is read off the grid tail by the free
/// functions below.
class GenNum {
 public:
  GenNum(GaugePtr gauge, std::vector<double> samples) : gauge_(std::move(gauge)), x_(std::move(samples)) {
    if (!gauge_) throw ConstructionError("GenNum needs a gauge");
    if (x_.size() != gauge_->size()) throw ConstructionError("GenNum length differs from grid length");
  }

  static GenNum constant(GaugePtr gauge, double c) {
    const std::size_t n = gauge->size();
    return GenNum(std::move(gauge), std::vector<double>(n, c));
  }

  /// Samples x_ε = f(ε, log ρ_ε).
  template <class F>
  static GenNum from_eps(GaugePtr gauge, F&& f) {
    std::vector<double> v(gauge->size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(gauge->eps(k), gauge->log_rho(k));
    return GenNum(std::move(gauge), std::move(v));
  }

  /// Samples indexed by grid position.
  template <class F>
  static GenNum from_index(GaugePtr gauge, F&& f) {
    std::vector<double> v(gauge->size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(k);
    return GenNum(std::move(gauge), std::move(v));
  }

  const Gauge& gauge() const { return *gauge_; }
  const GaugePtr& gauge_ptr() const { return gauge_; }
  std::size_t size() const { return x_.size(); }
  double operator[](std::size_t k) const { return x_[k]; }
  double& operator[](std::size_t k) { return x_[k]; }
  std::span<const double> samples() const { return x_; }
  double last() const { return x_.back(); }

  GenNum operator-() const {
    GenNum r = *this;
    for (double& v : r.x_) v = -v;
    return r;
  }
  GenNum& operator+=(const GenNum& o) { return apply(o, std::plus<>{}); }
  GenNum& operator-=(const GenNum& o) { return apply(o, std::minus<>{}); }
  GenNum& operator*=(const GenNum& o) { return apply(o, std::multiplies<>{}); }
  GenNum& operator/=(const GenNum& o) { return apply(o, std::divides<>{}); }
  GenNum& operator*=(double c) {
    for (double& v : x_) v *= c;
    return *this;
  }
  GenNum& operator+=(double c) {
    for (double& v : x_) v += c;
    return *this;
  }

  /// Samplewise application of a unary function.
  template <class F>
  GenNum map(F&& f) const {
    GenNum r = *this;
    for (double& v : r.x_) v = f(v);
    return r;
  }

 private:
  template <class Op>
  GenNum& apply(const GenNum& o, Op op) {
    require_same_gauge(o);
    for (std::size_t k = 0; k < x_.size(); ++k) x_[k] = op(x_[k], o.x_[k]);
    return *this;
  }

 public:
  void require_same_gauge(const GenNum& o) const {
    if (!gauge_->same_as(*o.gauge_)) throw GaugeMismatch();
  }

 private:
  GaugePtr gauge_;
  std::vector<double> x_;
};

inline GenNum operator+(GenNum a, const GenNum& b) { return a += b; }
inline GenNum operator-(GenNum a, const GenNum& b) { return a -= b; }
inline GenNum operator*(GenNum a, const GenNum& b) { return a *= b; }
inline GenNum operator/(GenNum a, const GenNum& b) { return a /= b; }
inline GenNum operator*(GenNum a, double c) { return a *= c; }
inline GenNum operator*(double c, GenNum a) { return a *= c; }
inline GenNum operator+(GenNum a, double c) { return a += c; }
inline GenNum operator-(GenNum a, double c) { return a += -c; }
inline GenNum operator+(double c, GenNum a) { return a += c; }
inline GenNum operator-(double c, const GenNum& a) { return -a + c; }

using GenVec = std::vector<GenNum>;

// ---------------------------------------------------------------------------
// Asymptotic classification

enum class Verdict { moderate, negligible, neither };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::moderate: return "moderate";
    case Verdict::negligible: return "negligible";
    case Verdict::neither: return "neither";
  }
  return "?";
}

struct AsymptoticReport {
  /// Least-squares slope of log|x_ε| against log ρ_ε on the tail; +inf when
  /// the tail is mostly zero, -inf when it contains non-finite samples.
  double estimated_order = 0.0;
  double fit_residual = 0.0;
  Verdict verdict = Verdict::neither;
  /// Moderateness exponent: |x_ε| ≤ C ρ_ε^{-(N + slack)} on the tail.
  int N = 0;
};

namespace detail {

struct LogTail {
  std::vector<double> lr;  // log ρ of nonzero samples
  std::vector<double> ly;  // log |x| of nonzero samples
  std::size_t zeros = 0;
  std::size_t tail = 0;
  bool nonfinite = false;
};

inline LogTail log_tail(const GenNum& x) {
  LogTail t;
  const Gauge& g = x.gauge();
  const std::size_t b = g.tail_begin();
  t.tail = x.size() - b;
  for (std::size_t k = b; k < x.size(); ++k) {
    const double v = x[k];
    if (!std::isfinite(v)) {
      t.nonfinite = true;
      continue;
    }
    if (v == 0.0) {
      ++t.zeros;
      continue;
    }
    t.lr.push_back(g.log_rho(k));
    t.ly.push_back(std::log(std::fabs(v)));
  }
  return t;
}

/// z_k = ly_k + e·lr_k must not exceed its maximum over the first half of the
/// points anywhere in the second half, i.e. |x| ≤ C ρ^{-e} with C fixed early.
inline bool bounded_after_fit(const LogTail& t, double e) {
  const std::size_t n = t.ly.size();
  if (n < 2) return true;
  const std::size_t half = (n + 1) / 2;
  double c = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < half; ++i) c = std::max(c, t.ly[i] + e * t.lr[i]);
  const double tol = 1e-9 * std::max(1.0, std::fabs(c));
  for (std::size_t i = half; i < n; ++i) {
    if (t.ly[i] + e * t.lr[i] > c + tol) return false;
  }
  return true;
}

inline std::pair<double, double> slope_fit(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n = xs.size();
  if (n < 2) return {0.0, 0.0};
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0.0;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - (my + slope * (xs[i] - mx));
    ss += r * r;
  }
  return {slope, std::sqrt(ss / static_cast<double>(n))};
}

}  // namespace detail

/// Tail-fit classification of a net as ρ-moderate, ρ-negligible or neither.
inline AsymptoticReport classify(const GenNum& x) {
  using P = AsymptoticPolicy;
  AsymptoticReport rep;
  const detail::LogTail t = detail::log_tail(x);
  if (t.nonfinite) {
    rep.estimated_order = -std::numeric_limits<double>::infinity();
    rep.verdict = Verdict::neither;
    return rep;
  }
  if (2 * t.zeros > t.tail || t.ly.empty()) {
    rep.estimated_order = std::numeric_limits<double>::infinity();
    rep.verdict = Verdict::negligible;
    return rep;
  }
  const auto [slope, resid] = detail::slope_fit(t.lr, t.ly);
  rep.estimated_order = slope;
  rep.fit_residual = resid;

  bool negligible = true;
  for (int m = 1; m <= P::m_max && negligible; ++m) negligible = detail::bounded_after_fit(t, -static_cast<double>(m));
  if (negligible) {
    rep.verdict = Verdict::negligible;
    return rep;
  }
  rep.N = static_cast<int>(std::max(0.0, std::ceil(-slope - 1e-6)));
  rep.verdict = detail::bounded_after_fit(t, rep.N + P::slack) ? Verdict::moderate : Verdict::neither;
  return rep;
}

inline bool is_moderate(const GenNum& x) { return classify(x).verdict != Verdict::neither; }
inline bool is_negligible(const GenNum& x) { return classify(x).verdict == Verdict::negligible; }

/// x ∼_ρ y: the difference is negligible. Samplewise differences within a
/// few ulps of the operands are rounding, not asymptotics, and count as zero.
inline bool gen_eq(const GenNum& x, const GenNum& y) {
  x.require_same_gauge(y);
  GenNum d = x - y;
  constexpr double ulps = 8.0 * std::numeric_limits<double>::epsilon();
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (std::fabs(d[k]) <= ulps * std::max(std::fabs(x[k]), std::fabs(y[k]))) d[k] = 0.0;
  }
  return is_negligible(d);
}

// ---------------------------------------------------------------------------
// Order

enum class Truth { no, yes, undecidable };

inline const char* to_string(Truth t) {
  switch (t) {
    case Truth::no: return "false";
    case Truth::yes: return "true";
    case Truth::undecidable: return "undecidable";
  }
  return "?";
}

namespace detail {

/// (y - x)_ε ≥ -ρ_ε^m_slack on the whole tail.
inline bool le_on_tail(const GenNum& x, const GenNum& y) {
  const Gauge& g = x.gauge();
  for (std::size_t k = g.tail_begin(); k < x.size(); ++k) {
    const double d = y[k] - x[k];
    if (std::isnan(d)) return false;
    if (d >= 0.0) continue;
    if (std::log(-d) > AsymptoticPolicy::m_slack * g.log_rho(k)) return false;
  }
  return true;
}

}  // namespace detail

/// Smallest m ≤ m_max with (y - x)_ε > ρ_ε^m on the tail, if any.
inline std::optional<int> lt_witness(const GenNum& x, const GenNum& y) {
  x.require_same_gauge(y);
  const Gauge& g = x.gauge();
  double need = -std::numeric_limits<double>::infinity();  // max over tail of log(d)/log(ρ) bound
  for (std::size_t k = g.tail_begin(); k < x.size(); ++k) {
    const double d = y[k] - x[k];
    if (!(d > 0.0)) return std::nullopt;
    // d > ρ^m  ⇔  log d > m log ρ  ⇔  m > log d / log ρ   (log ρ < 0 on the tail)
    need = std::max(need, std::log(d) / g.log_rho(k));
  }
  for (int m = 1; m <= AsymptoticPolicy::m_max; ++m) {
    if (static_cast<double>(m) > need) return m;
  }
  return std::nullopt;
}

inline Truth gen_le(const GenNum& x, const GenNum& y) {
  x.require_same_gauge(y);
  if (detail::le_on_tail(x, y)) return Truth::yes;
  if (lt_witness(y, x)) return Truth::no;
  return Truth::undecidable;
}

inline Truth gen_lt(const GenNum& x, const GenNum& y) {
  x.require_same_gauge(y);
  if (lt_witness(x, y)) return Truth::yes;
  if (detail::le_on_tail(y, x)) return Truth::no;
  return Truth::undecidable;
}

inline GenNum gen_min(const GenNum& x, const GenNum& y) {
  x.require_same_gauge(y);
  GenNum r = x;
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = std::min(x[k], y[k]);
  return r;
}

inline GenNum gen_max(const GenNum& x, const GenNum& y) {
  x.require_same_gauge(y);
  GenNum r = x;
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = std::max(x[k], y[k]);
  return r;
}

inline GenNum gen_abs(const GenNum& x) {
  return x.map([](double v) { return std::fabs(v); });
}

/// Square root, defined only on strictly positive numbers.
inline GenNum gen_sqrt(const GenNum& x) {
  if (gen_lt(GenNum::constant(x.gauge_ptr(), 0.0), x) != Truth::yes) {
    throw PreconditionError("gen_sqrt: argument is not strictly positive");
  }
  return x.map([](double v) { return v > 0.0 ? std::sqrt(v) : 0.0; });
}

// ---------------------------------------------------------------------------
// Standard part

struct StandardPartReport {
  double value = 0.0;
  bool exists = false;
  bool extrapolated = false;
  double rate = 0.0;  // estimated convergence exponent p in |Δx| ~ ε^p
  std::string message;
};

struct StandardPartOptions {
  /// Differences below this (times 1+|x|) are treated as exact agreement.
  double noise_floor = 1e-13;
  double stabilization_tol = 1e-6;
};

/// Limit of the samples as ε → 0, read off the last five grid points.
///
/// Stabilized tails (non-increasing differences, last one < 1e-6·(1+|x|))
/// return the last sample with a geometric correction when the ratio of the
/// last two differences is informative. Other tails are accepted only if the
/// difference ratios share a sign, are below one in magnitude and agree within
/// a factor two; the result is then Richardson-extrapolated.
inline StandardPartReport standard_part_report(const GenNum& x, StandardPartOptions opt = {}) {
  StandardPartReport rep;
  const std::size_t n = x.size();
  const std::size_t w = 5;
  std::vector<double> s(x.samples().end() - w, x.samples().end());
  double scale = 0;
  for (double v : s) {
    if (!std::isfinite(v)) {
      rep.message = "non-finite samples on the tail";
      return rep;
    }
    scale = std::max(scale, std::fabs(v));
  }
  const double floor = opt.noise_floor * (1.0 + scale);
  double d[4];
  for (int i = 0; i < 4; ++i) d[i] = s[i + 1] - s[i];
  const double last = s[4];

  bool all_flat = true;
  for (double di : d) all_flat = all_flat && std::fabs(di) <= floor;
  if (all_flat) {
    rep.value = last;
    rep.exists = true;
    rep.message = "constant tail";
    return rep;
  }

  const Gauge& g = x.gauge();
  const double eps_ratio = g.eps(n - 2) / g.eps(n - 1);

  bool non_increasing = true;
  for (int i = 0; i < 3; ++i) non_increasing = non_increasing && std::fabs(d[i + 1]) <= std::fabs(d[i]) + floor;

  auto geometric = [&](double r) { return last + d[3] * r / (1.0 - r); };

  if (non_increasing && std::fabs(d[3]) < opt.stabilization_tol * (1.0 + std::fabs(last))) {
    rep.exists = true;
    rep.value = last;
    if (std::fabs(d[2]) > 100.0 * floor && std::fabs(d[3]) > floor) {
      const double r = d[3] / d[2];
      if (std::fabs(r) < 1.0) {
        rep.value = geometric(r);
        rep.extrapolated = true;
        rep.rate = -std::log(std::fabs(r)) / std::log(eps_ratio);
      }
    }
    rep.message = "stabilized";
    return rep;
  }

  double r[3];
  for (int i = 0; i < 3; ++i) {
    if (std::fabs(d[i]) <= floor) {
      rep.message = "tail differences vanish irregularly";
      return rep;
    }
    r[i] = d[i + 1] / d[i];
  }
  const bool same_sign = (r[0] > 0) == (r[1] > 0) && (r[1] > 0) == (r[2] > 0);
  double rmin = std::fabs(r[0]), rmax = rmin;
  for (double ri : r) {
    rmin = std::min(rmin, std::fabs(ri));
    rmax = std::max(rmax, std::fabs(ri));
  }
  rep.rate = -std::log(std::fabs(r[2])) / std::log(eps_ratio);
  if (!same_sign || rmax >= 1.0 || rmax > 2.0 * rmin || !(rep.rate > 0.0)) {
    rep.message = "tail oscillates or diverges";
    return rep;
  }
  rep.exists = true;
  rep.extrapolated = true;
  rep.value = geometric(r[2]);
  rep.message = "richardson";
  return rep;
}

inline double standard_part(const GenNum& x, StandardPartOptions opt = {}) {
  const StandardPartReport rep = standard_part_report(x, opt);
  if (!rep.exists) throw NoStandardPart(rep.message);
  return rep.value;
}

// ---------------------------------------------------------------------------
// Valuation

struct Valuation {
  double nu = 0.0;      // +inf for (numerically) zero numbers
  double e_norm = 0.0;  // e^{-nu}
  GenNum drho_of;       // [ρ_ε^nu]; zero for zero numbers
};

inline Valuation valuation(const GenNum& x) {
  const AsymptoticReport rep = classify(x);
  if (rep.verdict == Verdict::negligible) {
    return {std::numeric_limits<double>::infinity(), 0.0, GenNum::constant(x.gauge_ptr(), 0.0)};
  }
  const double nu = rep.estimated_order;
  GenNum d = GenNum::from_index(x.gauge_ptr(), [&](std::size_t k) { return x.gauge().rho_pow(k, nu); });
  return {nu, std::exp(-nu), std::move(d)};
}

}  // namespace gsfc
