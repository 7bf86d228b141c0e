#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string>
#include <utility>

#include "gsfcalc/error.hpp"
#include "gsfcalc/finite_diff.hpp"
#include "gsfcalc/gen_num.hpp"

namespace gsfc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Integrand F(t, u, v) of I(u) = ∫ F(t, u, u̇) dt at grid level k.
///
/// Partials are taken from the analytic callbacks when supplied, otherwise by
/// Ridders differences with gauge-tied initial steps. The mixed block is
/// Fuv(i, j) = ∂²F/∂u_i∂v_j; F_vu is its transpose.
class Lagrangian {
 public:
  using Value = std::function<double(std::size_t k, double t, const Vec& u, const Vec& v)>;
  using Grad = std::function<Vec(std::size_t k, double t, const Vec& u, const Vec& v)>;
  using Hess = std::function<Mat(std::size_t k, double t, const Vec& u, const Vec& v)>;

  struct Analytic {
    Grad Fu, Fv, Fvt;
    Hess Fuu, Fuv, Fvv;
  };

  Lagrangian(GaugePtr gauge, int d, Value F, Analytic partials = {}, std::string name = "custom")
      : gauge_(std::move(gauge)), d_(d), F_(std::move(F)), an_(std::move(partials)), name_(std::move(name)) {
    if (d_ < 1) throw ConstructionError("Lagrangian dimension must be positive");
    if (!F_) throw ConstructionError("Lagrangian needs an integrand");
  }

  const GaugePtr& gauge_ptr() const { return gauge_; }
  const Gauge& gauge() const { return *gauge_; }
  int dim() const { return d_; }
  const std::string& name() const { return name_; }

  double F(std::size_t k, double t, const Vec& u, const Vec& v) const { return F_(k, t, u, v); }

  Vec Fu(std::size_t k, double t, const Vec& u, const Vec& v) const {
    if (an_.Fu) return an_.Fu(k, t, u, v);
    return grad(k, u, [&](const Vec& uu) { return F(k, t, uu, v); });
  }
  Vec Fv(std::size_t k, double t, const Vec& u, const Vec& v) const {
    if (an_.Fv) return an_.Fv(k, t, u, v);
    return grad(k, v, [&](const Vec& vv) { return F(k, t, u, vv); });
  }
  /// ∂_t F_v.
  Vec Fvt(std::size_t k, double t, const Vec& u, const Vec& v) const {
    if (an_.Fvt) return an_.Fvt(k, t, u, v);
    Vec out(d_);
    const double h0 = fd::gauge_step(gauge_->log_rho(k), t);
    for (int i = 0; i < d_; ++i) out(i) = fd::derivative([&](double s) { return Fv(k, t + s, u, v)(i); }, 0.0, h0);
    return out;
  }
  Mat Fuu(std::size_t k, double t, const Vec& u, const Vec& v) const {
    if (an_.Fuu) return an_.Fuu(k, t, u, v);
    return jac(k, u, [&](const Vec& uu) { return Fu(k, t, uu, v); });
  }
  Mat Fvv(std::size_t k, double t, const Vec& u, const Vec& v) const {
    if (an_.Fvv) return an_.Fvv(k, t, u, v);
    return jac(k, v, [&](const Vec& vv) { return Fv(k, t, u, vv); });
  }
  Mat Fuv(std::size_t k, double t, const Vec& u, const Vec& v) const {
    if (an_.Fuv) return an_.Fuv(k, t, u, v);
    // Column j: ∂/∂v_j of F_u.
    return jac(k, v, [&](const Vec& vv) { return Fu(k, t, u, vv); });
  }

 private:
  template <class G>
  Vec grad(std::size_t k, const Vec& x, G&& g) const {
    Vec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double h0 = fd::gauge_step(gauge_->log_rho(k), x(i));
      out(i) = fd::derivative(
          [&](double s) {
            Vec y = x;
            y(i) += s;
            return g(y);
          },
          0.0, h0);
    }
    return out;
  }

  /// Matrix with entry (i, j) = ∂ g_i / ∂ x_j.
  template <class G>
  Mat jac(std::size_t k, const Vec& x, G&& g) const {
    Mat out(d_, x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double h0 = fd::gauge_step(gauge_->log_rho(k), x(j));
      for (int i = 0; i < d_; ++i) {
        out(i, j) = fd::derivative(
            [&](double s) {
              Vec y = x;
              y(j) += s;
              return g(y)(i);
            },
            0.0, h0);
      }
    }
    return out;
  }

  GaugePtr gauge_;
  int d_;
  Value F_;
  Analytic an_;
  std::string name_;
};

namespace lagrangians {

/// F = ½|v|².
inline Lagrangian free_particle(GaugePtr g, int d = 1) {
  Lagrangian::Analytic a;
  a.Fu = [d](std::size_t, double, const Vec&, const Vec&) { return Vec::Zero(d); };
  a.Fv = [](std::size_t, double, const Vec&, const Vec& v) { return Vec(v); };
  a.Fvt = a.Fu;
  a.Fuu = [d](std::size_t, double, const Vec&, const Vec&) { return Mat::Zero(d, d); };
  a.Fuv = a.Fuu;
  a.Fvv = [d](std::size_t, double, const Vec&, const Vec&) { return Mat::Identity(d, d); };
  return Lagrangian(
      std::move(g), d, [](std::size_t, double, const Vec&, const Vec& v) { return 0.5 * v.squaredNorm(); }, a,
      "free");
}

/// F = ½(|v|² - ω_ε²|u|²).
inline Lagrangian harmonic(GaugePtr g, const GenNum& omega, int d = 1) {
  std::vector<double> w2(omega.size());
  for (std::size_t k = 0; k < w2.size(); ++k) w2[k] = omega[k] * omega[k];
  Lagrangian::Analytic a;
  a.Fu = [w2](std::size_t k, double, const Vec& u, const Vec&) { return Vec(-w2[k] * u); };
  a.Fv = [](std::size_t, double, const Vec&, const Vec& v) { return Vec(v); };
  a.Fvt = [d](std::size_t, double, const Vec&, const Vec&) { return Vec::Zero(d); };
  a.Fuu = [w2, d](std::size_t k, double, const Vec&, const Vec&) { return Mat(-w2[k] * Mat::Identity(d, d)); };
  a.Fuv = [d](std::size_t, double, const Vec&, const Vec&) { return Mat::Zero(d, d); };
  a.Fvv = [d](std::size_t, double, const Vec&, const Vec&) { return Mat::Identity(d, d); };
  return Lagrangian(
      std::move(g), d,
      [w2](std::size_t k, double, const Vec& u, const Vec& v) { return 0.5 * (v.squaredNorm() - w2[k] * u.squaredNorm()); },
      a, "harmonic");
}

inline Lagrangian harmonic(GaugePtr g, double omega = 1.0, int d = 1) {
  const GenNum w = GenNum::constant(g, omega);
  return harmonic(std::move(g), w, d);
}

/// F = -½|v|²: fails the Legendre condition.
inline Lagrangian inverted(GaugePtr g, int d = 1) {
  Lagrangian::Analytic a;
  a.Fu = [d](std::size_t, double, const Vec&, const Vec&) { return Vec::Zero(d); };
  a.Fv = [](std::size_t, double, const Vec&, const Vec& v) { return Vec(-v); };
  a.Fvt = a.Fu;
  a.Fuu = [d](std::size_t, double, const Vec&, const Vec&) { return Mat::Zero(d, d); };
  a.Fuv = a.Fuu;
  a.Fvv = [d](std::size_t, double, const Vec&, const Vec&) { return Mat(-Mat::Identity(d, d)); };
  return Lagrangian(
      std::move(g), d, [](std::size_t, double, const Vec&, const Vec& v) { return -0.5 * v.squaredNorm(); }, a,
      "inverted");
}

}  // namespace lagrangians

}  // namespace gsfc
