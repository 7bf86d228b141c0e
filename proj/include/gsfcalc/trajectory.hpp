#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <ostream>
#include <utility>
#include <vector>

#include "gsfcalc/csv.hpp"
#include "gsfcalc/error.hpp"
#include "gsfcalc/finite_diff.hpp"
#include "gsfcalc/gen_num.hpp"
#include "gsfcalc/gsf.hpp"

namespace gsfc {

/// Per-ε samples of a curve u and its velocity u̇ on a uniform time grid of
/// the interval [a_ε, b_ε]. Column i of u(k) is the sample at t_i.
class Trajectory {
 public:
  using Curve = std::function<Vec(std::size_t k, double t)>;

  Trajectory(IntervalDomain dom, int d, std::size_t nodes, std::vector<Mat> u, std::vector<Mat> v)
      : dom_(std::move(dom)), d_(d), nodes_(nodes), u_(std::move(u)), v_(std::move(v)) {
    const std::size_t K = dom_.gauge_ptr()->size();
    if (nodes_ < 5) throw ConstructionError("trajectory needs at least 5 time nodes");
    if (u_.size() != K || v_.size() != K) throw ConstructionError("trajectory needs one sample block per grid level");
    for (std::size_t k = 0; k < K; ++k) {
      if (u_[k].rows() != d_ || v_[k].rows() != d_ || static_cast<std::size_t>(u_[k].cols()) != nodes_ ||
          static_cast<std::size_t>(v_[k].cols()) != nodes_) {
        throw ConstructionError("trajectory sample block has the wrong shape");
      }
      if (!u_[k].allFinite() || !v_[k].allFinite()) throw ConstructionError("trajectory samples must be finite");
    }
  }

  /// Samples the curve f and its derivative df on the grid.
  static Trajectory sample(const IntervalDomain& dom, int d, std::size_t nodes, const Curve& f, const Curve& df) {
    const std::size_t K = dom.gauge_ptr()->size();
    std::vector<Mat> u(K, Mat(d, nodes)), v(K, Mat(d, nodes));
    for (std::size_t k = 0; k < K; ++k) {
      const double h = (dom.b(k) - dom.a(k)) / static_cast<double>(nodes - 1);
      for (std::size_t i = 0; i < nodes; ++i) {
        const double t = dom.a(k) + h * static_cast<double>(i);
        u[k].col(static_cast<Eigen::Index>(i)) = f(k, t);
        v[k].col(static_cast<Eigen::Index>(i)) = df(k, t);
      }
    }
    return {dom, d, nodes, std::move(u), std::move(v)};
  }

  const IntervalDomain& domain() const { return dom_; }
  const GaugePtr& gauge_ptr() const { return dom_.gauge_ptr(); }
  const Gauge& gauge() const { return *dom_.gauge_ptr(); }
  int dim() const { return d_; }
  std::size_t nodes() const { return nodes_; }
  std::size_t levels() const { return u_.size(); }

  double step(std::size_t k) const { return (dom_.b(k) - dom_.a(k)) / static_cast<double>(nodes_ - 1); }
  double t(std::size_t k, std::size_t i) const { return dom_.a(k) + step(k) * static_cast<double>(i); }

  const Mat& u(std::size_t k) const { return u_[k]; }
  const Mat& v(std::size_t k) const { return v_[k]; }
  Vec u(std::size_t k, std::size_t i) const { return u_[k].col(static_cast<Eigen::Index>(i)); }
  Vec v(std::size_t k, std::size_t i) const { return v_[k].col(static_cast<Eigen::Index>(i)); }

  /// Boundary values u(a) and u(b), one GenNum per component.
  GenVec p() const { return boundary(0); }
  GenVec q() const { return boundary(nodes_ - 1); }

  /// max over nodes and components of |d/dt u - v| with the grid stencil.
  GenNum velocity_mismatch() const {
    return GenNum::from_index(gauge_ptr(), [&](std::size_t k) {
      double m = 0.0;
      for (int c = 0; c < d_; ++c) {
        std::vector<double> row(nodes_);
        for (std::size_t i = 0; i < nodes_; ++i) row[i] = u_[k](c, static_cast<Eigen::Index>(i));
        const auto du = fd::d_dt(row, step(k));
        for (std::size_t i = 0; i < nodes_; ++i) m = std::max(m, std::fabs(du[i] - v_[k](c, static_cast<Eigen::Index>(i))));
      }
      return m;
    });
  }

  /// u + s·η, v + s·η̇ on the same grid.
  Trajectory perturbed(const Trajectory& eta, double s) const {
    std::vector<Mat> u = u_, v = v_;
    for (std::size_t k = 0; k < u.size(); ++k) {
      u[k] += s * eta.u(k);
      v[k] += s * eta.v(k);
    }
    return {dom_, d_, nodes_, std::move(u), std::move(v)};
  }

 private:
  GenVec boundary(std::size_t i) const {
    GenVec out;
    for (int c = 0; c < d_; ++c) {
      out.push_back(GenNum::from_index(gauge_ptr(), [&](std::size_t k) { return u_[k](c, static_cast<Eigen::Index>(i)); }));
    }
    return out;
  }

  IntervalDomain dom_;
  int d_;
  std::size_t nodes_;
  std::vector<Mat> u_, v_;
};

/// A trajectory with vanishing boundary values.
class VariationField : public Trajectory {
 public:
  explicit VariationField(Trajectory t) : Trajectory(std::move(t)) {
    for (const GenNum& x : p()) {
      if (!is_negligible(x)) throw ConstructionError("variation field must vanish at a");
    }
    for (const GenNum& x : q()) {
      if (!is_negligible(x)) throw ConstructionError("variation field must vanish at b");
    }
  }
};

/// η = sin(mπ(t-a)/(b-a))·e_comp on the grid of `like`.
inline VariationField mode_field(const Trajectory& like, int m, int comp) {
  const IntervalDomain& dom = like.domain();
  const int d = like.dim();
  auto f = [&](std::size_t k, double t) {
    Vec e = Vec::Zero(d);
    const double L = dom.b(k) - dom.a(k);
    e(comp) = std::sin(m * std::numbers::pi * (t - dom.a(k)) / L);
    return e;
  };
  auto df = [&](std::size_t k, double t) {
    Vec e = Vec::Zero(d);
    const double L = dom.b(k) - dom.a(k);
    const double w = m * std::numbers::pi / L;
    e(comp) = w * std::cos(w * (t - dom.a(k)));
    return e;
  };
  Trajectory t = Trajectory::sample(dom, d, like.nodes(), f, df);
  // sin(mπ) is only approximately zero; pin the end samples.
  std::vector<Mat> u, v;
  for (std::size_t k = 0; k < t.levels(); ++k) {
    Mat uk = t.u(k);
    uk.col(0).setZero();
    uk.col(uk.cols() - 1).setZero();
    u.push_back(std::move(uk));
    v.push_back(t.v(k));
  }
  return VariationField(Trajectory(dom, d, like.nodes(), std::move(u), std::move(v)));
}

/// The basis used for "for all variations" checks: modes m = 1..8 in every component.
inline std::vector<VariationField> mode_basis(const Trajectory& like, int modes = 8) {
  std::vector<VariationField> out;
  for (int c = 0; c < like.dim(); ++c)
    for (int m = 1; m <= modes; ++m) out.push_back(mode_field(like, m, c));
  return out;
}

namespace detail {

/// Four-point Lagrange interpolation of equally spaced samples row(0..n-1)
/// with spacing h starting at t0.
inline double interp4_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, double t0, double h, double t) {
  const Eigen::Index n = row.size();
  double s = (t - t0) / h;
  Eigen::Index i = static_cast<Eigen::Index>(std::floor(s)) - 1;
  i = std::clamp<Eigen::Index>(i, 0, n - 4);
  s -= static_cast<double>(i);
  const double y0 = row(i), y1 = row(i + 1), y2 = row(i + 2), y3 = row(i + 3);
  return -y0 * (s - 1) * (s - 2) * (s - 3) / 6.0 + y1 * s * (s - 2) * (s - 3) / 2.0 - y2 * s * (s - 1) * (s - 3) / 2.0 +
         y3 * s * (s - 1) * (s - 2) / 6.0;
}

inline Vec interp4(const Mat& block, double t0, double h, double t) {
  Vec out(block.rows());
  for (Eigen::Index r = 0; r < block.rows(); ++r) out(r) = interp4_row(block.row(r), t0, h, t);
  return out;
}

}  // namespace detail

/// Time → ℝ^rows family interpolating per-ε samples on the grid of `like`.
inline GsfFamily sampled_family(const Trajectory& like, std::vector<Mat> samples) {
  auto data = std::make_shared<const std::vector<Mat>>(std::move(samples));
  const IntervalDomain dom = like.domain();
  const std::size_t nodes = like.nodes();
  const int rows = static_cast<int>(data->front().rows());
  Evaluator e = [data, dom, nodes](std::size_t k, const Vec& x) {
    const double h = (dom.b(k) - dom.a(k)) / static_cast<double>(nodes - 1);
    return detail::interp4((*data)[k], dom.a(k), h, x(0));
  };
  return GsfFamily(like.gauge_ptr(), 1, rows, e, {}, BoxDomain{{dom.a()}, {dom.b()}});
}

/// Columns k, eps, t, then u_1..u_d, v_1..v_d.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  std::vector<std::string> header{"k", "eps", "t"};
  for (int c = 0; c < tr.dim(); ++c) header.push_back("u" + std::to_string(c + 1));
  for (int c = 0; c < tr.dim(); ++c) header.push_back("v" + std::to_string(c + 1));
  csv::write_row(os, header);
  for (std::size_t k = 0; k < tr.levels(); ++k) {
    for (std::size_t i = 0; i < tr.nodes(); ++i) {
      std::vector<std::string> row{std::to_string(k + 1), csv::num(tr.gauge().eps(k)), csv::num(tr.t(k, i))};
      for (int c = 0; c < tr.dim(); ++c) row.push_back(csv::num(tr.u(k)(c, static_cast<Eigen::Index>(i))));
      for (int c = 0; c < tr.dim(); ++c) row.push_back(csv::num(tr.v(k)(c, static_cast<Eigen::Index>(i))));
      csv::write_row(os, row);
    }
  }
}

}  // namespace gsfc
