#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <numbers>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gsfcalc/embedding.hpp"
#include "gsfcalc/error.hpp"
#include "gsfcalc/gen_num.hpp"
#include "gsfcalc/lagrangian.hpp"
#include "gsfcalc/minimizer.hpp"
#include "gsfcalc/mollifier.hpp"
#include "gsfcalc/quadrature.hpp"
#include "gsfcalc/trajectory.hpp"
#include "gsfcalc/varcalc.hpp"

namespace gsfc {

/// A Riemannian metric on ℝ^D of limited regularity.
template <int D>
struct MetricSpec {
  using VecD = Eigen::Matrix<double, D, 1>;
  using MatD = Eigen::Matrix<double, D, D>;

  std::string name;
  std::function<MatD(const VecD&)> g;
  /// Exact first derivatives ∂_i g, where they exist; used by classical comparisons only.
  std::function<std::array<MatD, D>(const VecD&)> dg;
  /// Per coordinate, hyperplanes x_i = c across which derivatives of g jump.
  std::array<std::vector<double>, D> breakpoints{};
  std::vector<VecD> probes;
  /// Geodesics leaving the box |x|_∞ ≤ box count as blow-up.
  double box = 1e3;

  /// Symmetry and positive-definiteness on the probe set.
  void validate() const {
    if (!g) throw ConstructionError("metric needs component evaluators");
    for (const VecD& x : probes) {
      const MatD G = g(x);
      if (!G.allFinite() || (G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + G.cwiseAbs().maxCoeff())) {
        throw ConstructionError("metric is not symmetric at a probe");
      }
      const double lmin = Eigen::SelfAdjointEigenSolver<MatD>(G, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
      if (!(lmin > 0.0)) {
        std::ostringstream msg;
        msg << "metric not positive-definite at probe (" << x.transpose() << "): min eigenvalue " << lmin;
        throw ConstructionError(msg.str());
      }
    }
  }
};

namespace metrics {

template <int D>
std::vector<typename MetricSpec<D>::VecD> grid_probes(double lo, double hi, int per_dim) {
  using VecD = typename MetricSpec<D>::VecD;
  std::vector<VecD> out;
  int total = 1;
  for (int i = 0; i < D; ++i) total *= per_dim;
  for (int n = 0; n < total; ++n) {
    VecD x;
    int r = n;
    for (int i = 0; i < D; ++i) {
      x(i) = lo + (hi - lo) * (r % per_dim) / (per_dim - 1.0);
      r /= per_dim;
    }
    out.push_back(x);
  }
  return out;
}

/// Euclidean metric on ℝ².
inline MetricSpec<2> flat() {
  MetricSpec<2> m;
  m.name = "flat";
  m.g = [](const Eigen::Vector2d&) { return Eigen::Matrix2d::Identity().eval(); };
  m.dg = [](const Eigen::Vector2d&) { return std::array<Eigen::Matrix2d, 2>{Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()}; };
  m.probes = grid_probes<2>(-2.0, 2.0, 5);
  return m;
}

/// g = e^{2φ}·Id with φ(x, y) = amplitude·x|x|: C^{1,1} but not C².
inline MetricSpec<2> conformal_c11(double amplitude = 0.1) {
  MetricSpec<2> m;
  m.name = "conformal-c11";
  m.g = [amplitude](const Eigen::Vector2d& x) {
    return (std::exp(2.0 * amplitude * x(0) * std::fabs(x(0))) * Eigen::Matrix2d::Identity()).eval();
  };
  m.dg = [amplitude](const Eigen::Vector2d& x) {
    const double e = std::exp(2.0 * amplitude * x(0) * std::fabs(x(0)));
    // ∂_x e^{2φ} = 2φ_x e^{2φ}, φ_x = 2·amplitude·|x|.
    return std::array<Eigen::Matrix2d, 2>{(4.0 * amplitude * std::fabs(x(0)) * e * Eigen::Matrix2d::Identity()).eval(),
                                          Eigen::Matrix2d::Zero()};
  };
  m.breakpoints[0] = {0.0};
  m.probes = grid_probes<2>(-2.0, 2.0, 5);
  return m;
}

/// g(x) = c0 + x² on ℝ; positive-definite only for c0 > 0.
inline MetricSpec<1> curved_1d(double c0 = 1.0) {
  MetricSpec<1> m;
  m.name = "curved-1d";
  m.g = [c0](const Eigen::Matrix<double, 1, 1>& x) { return Eigen::Matrix<double, 1, 1>::Constant(c0 + x(0) * x(0)); };
  m.dg = [](const Eigen::Matrix<double, 1, 1>& x) {
    return std::array<Eigen::Matrix<double, 1, 1>, 1>{Eigen::Matrix<double, 1, 1>::Constant(2.0 * x(0))};
  };
  m.probes = grid_probes<1>(-2.0, 2.0, 9);
  return m;
}

}  // namespace metrics

struct RegularizationOptions {
  /// Chebyshev nodes per kernel coordinate and per smooth piece of g.
  int nodes = 16;
  /// Gauss–Legendre panels on [-1, 1] for the kernel moments of split pieces.
  int moment_panels = 16;
};

namespace detail {

/// Product-integration rule for ∫_c^d f(z) ψ^(r)(z) dz ≈ Σ_k w_k f(z_k) at n
/// Chebyshev points of [c, d]; exact when f is a polynomial of degree < n.
struct KernelRule {
  std::vector<double> z;
  std::array<std::vector<double>, 3> w;
};

/// ψ, ψ', ψ'' on [-1, 1] by cubic Hermite interpolation of a fine table.
class KernelTable {
 public:
  static constexpr int kCells = 8192;

  explicit KernelTable(const Mollifier& m) {
    for (int r = 0; r < 4; ++r) v_[r].resize(kCells + 1);
    for (int i = 0; i <= kCells; ++i) {
      const double x = -1.0 + 2.0 * i / kCells;
      for (int r = 0; r < 4; ++r) v_[r][static_cast<std::size_t>(i)] = m.derivative(x, r);
    }
  }

  double operator()(double x, int r) const {
    if (!(std::fabs(x) < 1.0)) return 0.0;
    constexpr double h = 2.0 / kCells;
    const double u = (x + 1.0) / h;
    const auto i = std::min(static_cast<std::size_t>(u), static_cast<std::size_t>(kCells - 1));
    const double s = u - static_cast<double>(i);
    const double f0 = v_[r][i], f1 = v_[r][i + 1], d0 = h * v_[r + 1][i], d1 = h * v_[r + 1][i + 1];
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * f1 + (s3 - s2) * d1;
  }

 private:
  std::array<std::vector<double>, 4> v_;
};

template <class Kernel>
void append_kernel_rule(KernelRule& out, const Kernel& m, double c, double d, int n, int panels, int orders) {
  const auto& gl = quad::GL16::get();
  const double half = 0.5 * (d - c), mid = 0.5 * (d + c);
  std::vector<double> tau(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) tau[static_cast<std::size_t>(k)] = std::cos((2.0 * k + 1.0) * std::numbers::pi / (2.0 * n));
  // μ_m^(r) = ∫_c^d ψ^(r)(s) T_m(τ(s)) ds
  std::array<std::vector<double>, 3> mu;
  for (auto& v : mu) v.assign(static_cast<std::size_t>(n), 0.0);
  const int P = std::max(4, static_cast<int>(std::ceil(panels * half)));
  const double h = 2.0 / P;
  std::vector<double> T(static_cast<std::size_t>(n));
  for (int p = 0; p < P; ++p) {
    for (int q = 0; q < 16; ++q) {
      const double t = -1.0 + h * (p + 0.5) + 0.5 * h * gl.x[q];
      const double s = mid + half * t, w = 0.5 * h * gl.w[q] * half;
      T[0] = 1.0;
      if (n > 1) T[1] = t;
      for (int i = 2; i < n; ++i) T[i] = 2.0 * t * T[i - 1] - T[i - 2];
      for (int r = 0; r < orders; ++r) {
        const double f = w * m(s, r);
        if (f == 0.0) continue;
        for (int i = 0; i < n; ++i) mu[r][i] += f * T[i];
      }
    }
  }
  for (int k = 0; k < n; ++k) {
    out.z.push_back(mid + half * tau[k]);
    T[0] = 1.0;
    if (n > 1) T[1] = tau[k];
    for (int i = 2; i < n; ++i) T[i] = 2.0 * tau[k] * T[i - 1] - T[i - 2];
    for (int r = 0; r < 3; ++r) {
      double wk = 0.0;
      if (r < orders) {
        for (int i = 0; i < n; ++i) wk += (i == 0 ? 0.5 : 1.0) * T[i] * mu[r][i];
        wk *= 2.0 / n;
      }
      out.w[r].push_back(wk);
    }
  }
}

}  // namespace detail

/// g^ε = g ∗ ψ_ε^b with the tensor-product kernel Π ψ(b x_i)·b, plus first
/// and second derivatives by convolution with kernel derivatives.
template <int D>
class RegularizedMetric {
 public:
  using VecD = Eigen::Matrix<double, D, 1>;
  using MatD = Eigen::Matrix<double, D, D>;

  struct Jet {
    MatD g;
    std::array<MatD, D> dg;
    std::array<std::array<MatD, D>, D> d2g;
  };

  RegularizedMetric(MetricSpec<D> spec, const Mollifier& m, EmbeddingParams params, RegularizationOptions opt = {})
      : spec_(std::move(spec)), mol_(m), params_(std::move(params)), opt_(opt),
        table_(std::make_shared<const detail::KernelTable>(m)), cache_(std::make_shared<Cache>()) {
    if (opt_.nodes < 2 || opt_.moment_panels < 1) throw ConstructionError("invalid regularization quadrature");
    spec_.validate();
    detail::append_kernel_rule(full_, [this](double z, int r) { return mol_.derivative(z, r); }, -1.0, 1.0, opt_.nodes,
                               4 * opt_.moment_panels, 3);
    const Gauge& g = gauge();
    for (std::size_t k = g.tail_begin(); k < g.size(); ++k) {
      for (const VecD& x : spec_.probes) {
        const MatD G = metric(k, x);
        const double lmin = Eigen::SelfAdjointEigenSolver<MatD>(G, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
        if (!(lmin > 0.0)) {
          std::ostringstream msg;
          msg << "regularized metric not positive-definite at probe (" << x.transpose() << ") level " << k + 1
              << "; mollification too coarse";
          throw ConstructionError(msg.str());
        }
      }
    }
  }

  const MetricSpec<D>& spec() const { return spec_; }
  const Gauge& gauge() const { return params_.b().gauge(); }
  const GaugePtr& gauge_ptr() const { return params_.gauge_ptr(); }
  const EmbeddingParams& params() const { return params_; }

  /// Jet of g^ε at x to the given derivative order (0, 1 or 2).
  Jet jet(std::size_t k, const VecD& x, int order = 1) const {
    if (order == 2) return cached_jet2(k, x);
    return compute(k, x, order);
  }

  MatD metric(std::size_t k, const VecD& x) const { return compute(k, x, 0).g; }

  /// Γ^m_ij as gamma[m](i, j).
  std::array<MatD, D> christoffel(std::size_t k, const VecD& x) const { return christoffel_from(jet(k, x, 1)); }

  static std::array<MatD, D> christoffel_from(const Jet& J) {
    Eigen::LLT<MatD> llt(J.g);
    if (llt.info() != Eigen::Success) throw SolverError("singular or indefinite metric");
    std::array<MatD, D> lower;  // lower[l](i, j) = ½(∂_i g_jl + ∂_j g_il - ∂_l g_ij)
    for (int l = 0; l < D; ++l)
      for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) lower[l](i, j) = 0.5 * (J.dg[i](j, l) + J.dg[j](i, l) - J.dg[l](i, j));
    std::array<MatD, D> gamma;
    for (int i = 0; i < D; ++i) {
      for (int j = 0; j < D; ++j) {
        VecD c;
        for (int l = 0; l < D; ++l) c(l) = lower[l](i, j);
        const VecD s = llt.solve(c);
        for (int m = 0; m < D; ++m) gamma[m](i, j) = s(m);
      }
    }
    return gamma;
  }

  /// ÿ = -Γ(y)(ẏ, ẏ).
  VecD acceleration(std::size_t k, const VecD& y, const VecD& v) const {
    const Jet J = compute(k, y, 1);
    VecD w;
    for (int l = 0; l < D; ++l) {
      double s = 0.0;
      for (int i = 0; i < D; ++i) s += v(i) * (J.dg[i] * v)(l) - 0.5 * v(i) * (J.dg[l] * v)(i);
      w(l) = s;
    }
    Eigen::LLT<MatD> llt(J.g);
    if (llt.info() != Eigen::Success) throw SolverError("singular or indefinite metric");
    return -llt.solve(w);
  }

 private:
  /// Kernel rule for coordinate i at x_i, split where g has a breakpoint.
  detail::KernelRule rule(int i, double xi, double b, int orders) const {
    std::vector<double> cuts{-1.0};
    for (double p : spec_.breakpoints[static_cast<std::size_t>(i)]) {
      const double zs = b * (xi - p);
      if (zs > -1.0 && zs < 1.0) cuts.push_back(zs);
    }
    if (cuts.size() == 1) return full_;
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(1.0);
    detail::KernelRule r;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      detail::append_kernel_rule(r, *table_, cuts[s], cuts[s + 1], opt_.nodes, opt_.moment_panels, orders + 1);
    }
    return r;
  }

  Jet compute(std::size_t k, const VecD& x, int order) const {
    const double b = params_.b(k);
    std::array<detail::KernelRule, D> rules;
    for (int i = 0; i < D; ++i) rules[static_cast<std::size_t>(i)] = rule(i, x(i), b, order);
    Jet J;
    J.g.setZero();
    for (auto& m : J.dg) m.setZero();
    for (auto& row : J.d2g)
      for (auto& m : row) m.setZero();
    std::array<std::size_t, D> idx{};
    for (;;) {
      VecD y;
      for (int i = 0; i < D; ++i) y(i) = x(i) - rules[i].z[idx[i]] / b;
      const MatD G = spec_.g(y);
      double w0 = 1.0;
      for (int i = 0; i < D; ++i) w0 *= rules[i].w[0][idx[i]];
      J.g += w0 * G;
      if (order >= 1) {
        for (int i = 0; i < D; ++i) {
          double w = b * rules[i].w[1][idx[i]];
          for (int j = 0; j < D; ++j)
            if (j != i) w *= rules[j].w[0][idx[j]];
          J.dg[i] += w * G;
        }
      }
      if (order >= 2) {
        for (int i = 0; i < D; ++i) {
          for (int j = i; j < D; ++j) {
            double w = b * b;
            for (int l = 0; l < D; ++l) {
              if (l == i && l == j) w *= rules[l].w[2][idx[l]];
              else if (l == i || l == j) w *= rules[l].w[1][idx[l]];
              else w *= rules[l].w[0][idx[l]];
            }
            J.d2g[i][j] += w * G;
          }
        }
      }
      int i = 0;
      while (i < D && ++idx[i] == rules[i].z.size()) idx[i++] = 0;
      if (i == D) break;
    }
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < i; ++j) J.d2g[i][j] = J.d2g[j][i];
    return J;
  }

  struct Key {
    std::size_t k;
    std::array<double, D> x;
    bool operator==(const Key& o) const { return k == o.k && std::memcmp(x.data(), o.x.data(), sizeof(double) * D) == 0; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& key) const {
      std::size_t h = std::hash<std::size_t>{}(key.k);
      for (double v : key.x) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h ^= std::hash<std::uint64_t>{}(bits) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      }
      return h;
    }
  };
  struct Cache {
    std::mutex mu;
    std::unordered_map<Key, Jet, KeyHash> jets;
  };

  /// Order-2 jets are requested repeatedly at the same trajectory samples by
  /// the Lagrangian partials, so they are memoized.
  Jet cached_jet2(std::size_t k, const VecD& x) const {
    Key key{k, {}};
    for (int i = 0; i < D; ++i) key.x[static_cast<std::size_t>(i)] = x(i);
    {
      std::lock_guard<std::mutex> lock(cache_->mu);
      if (auto it = cache_->jets.find(key); it != cache_->jets.end()) return it->second;
    }
    Jet J = compute(k, x, 2);
    std::lock_guard<std::mutex> lock(cache_->mu);
    if (cache_->jets.size() > 200000) cache_->jets.clear();
    cache_->jets.emplace(key, J);
    return J;
  }

  MetricSpec<D> spec_;
  Mollifier mol_;
  EmbeddingParams params_;
  RegularizationOptions opt_;
  detail::KernelRule full_;
  std::shared_ptr<const detail::KernelTable> table_;
  std::shared_ptr<Cache> cache_;
};

/// max over probes of |g^ε - g| per level.
template <int D>
GenNum metric_c0_error(const RegularizedMetric<D>& rg, const std::vector<typename MetricSpec<D>::VecD>& probes) {
  return GenNum::from_index(rg.gauge_ptr(), [&](std::size_t k) {
    double m = 0.0;
    for (const auto& x : probes) m = std::max(m, (rg.metric(k, x) - rg.spec().g(x)).cwiseAbs().maxCoeff());
    return m;
  });
}

struct GeodesicOptions {
  /// Output intervals on [0, t_end].
  std::size_t rk4_steps = 256;
  /// For metrics with breakpoints, RK4 substeps per output interval are raised
  /// until a crossing of the kernel width 1/b takes this many steps.
  double layer_resolution = 4.0;
  std::size_t max_substeps = 64;
  double newton_tol = 1e-9;
  int max_iterations = 50;
};

namespace detail {

template <int D>
using GeoVec = Eigen::Matrix<double, D, 1>;

/// Fixed RK4 substeps per output interval at level k for initial velocity c0.
template <int D>
std::size_t geodesic_substeps(const RegularizedMetric<D>& rg, std::size_t k, const GeoVec<D>& c0, double t_end,
                              const GeodesicOptions& opt) {
  bool kinks = false;
  for (const auto& b : rg.spec().breakpoints) kinks = kinks || !b.empty();
  if (!kinks) return 1;
  const double h = t_end / static_cast<double>(opt.rk4_steps);
  const double want = std::ceil(h * opt.layer_resolution * rg.params().b(k) * c0.template lpNorm<Eigen::Infinity>());
  return static_cast<std::size_t>(std::clamp(want, 1.0, static_cast<double>(opt.max_substeps)));
}

/// RK4 for the geodesic equation at level k on [0, t_end]; returns y(t_end).
template <int D>
GeoVec<D> geodesic_shoot(const RegularizedMetric<D>& rg, std::size_t k, const GeoVec<D>& p, const GeoVec<D>& c0,
                         double t_end, const GeodesicOptions& opt, Mat* U, Mat* V) {
  const std::size_t steps = opt.rk4_steps, sub = geodesic_substeps(rg, k, c0, t_end, opt);
  const double h = t_end / static_cast<double>(steps * sub);
  GeoVec<D> y = p, v = c0;
  if (U) {
    U->resize(D, static_cast<Eigen::Index>(steps + 1));
    V->resize(D, static_cast<Eigen::Index>(steps + 1));
    U->col(0) = y;
    V->col(0) = v;
  }
  const double box = rg.spec().box;
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t j = 0; j < sub; ++j) {
      const GeoVec<D> k1y = v, k1v = rg.acceleration(k, y, v);
      const GeoVec<D> k2y = v + 0.5 * h * k1v, k2v = rg.acceleration(k, y + 0.5 * h * k1y, k2y);
      const GeoVec<D> k3y = v + 0.5 * h * k2v, k3v = rg.acceleration(k, y + 0.5 * h * k2y, k3y);
      const GeoVec<D> k4y = v + h * k3v, k4v = rg.acceleration(k, y + h * k3y, k4y);
      y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
      v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
      if (!y.allFinite() || !v.allFinite() || y.cwiseAbs().maxCoeff() > box) {
        throw SolverError("geodesic left the domain box");
      }
    }
    if (U) {
      U->col(static_cast<Eigen::Index>(i + 1)) = y;
      V->col(static_cast<Eigen::Index>(i + 1)) = v;
    }
  }
  return y;
}

}  // namespace detail

/// Geodesics of g^ε from p with initial velocity c0 on [0, t_end], per level.
template <int D>
Trajectory geodesic_ivp(const RegularizedMetric<D>& rg, const Vec& p, const Vec& c0, double t_end,
                        const GeodesicOptions& opt = {}) {
  if (p.size() != D || c0.size() != D) throw PreconditionError("geodesic_ivp: wrong dimension");
  if (!(t_end > 0.0)) throw PreconditionError("geodesic_ivp: t_end must be positive");
  const std::size_t K = rg.gauge().size();
  std::vector<Mat> U(K), V(K);
  for (std::size_t k = 0; k < K; ++k) detail::geodesic_shoot<D>(rg, k, p, c0, t_end, opt, &U[k], &V[k]);
  return {IntervalDomain::constant(rg.gauge_ptr(), 0.0, t_end), D, opt.rk4_steps + 1, std::move(U), std::move(V)};
}

/// L(λ) = ∫ (g^ε(λ)(λ̇, λ̇))^{1/2} dt per level; the velocity must not degenerate.
template <int D>
GenNum length(const RegularizedMetric<D>& rg, const Trajectory& lam) {
  if (lam.dim() != D) throw PreconditionError("length: wrong dimension");
  if (!rg.gauge().same_as(lam.gauge())) throw GaugeMismatch();
  return GenNum::from_index(lam.gauge_ptr(), [&](std::size_t k) {
    std::vector<double> s(lam.nodes());
    for (std::size_t i = 0; i < lam.nodes(); ++i) {
      const Eigen::Matrix<double, D, 1> y = lam.u(k, i), v = lam.v(k, i);
      const double q = v.dot(rg.metric(k, y) * v);
      if (!(q > 0.0)) throw PreconditionError("length: degenerate velocity");
      s[i] = std::sqrt(q);
    }
    return quad::simpson(s, lam.step(k));
  });
}

struct GeodesicResult {
  Trajectory trajectory;
  GenVec initial_velocity;
  GenNum length;
  /// max_t |g(ẏ, ẏ) - g(ẏ(0), ẏ(0))| per level.
  GenNum speed_drift;
  /// max_t |ÿ + Γ(ẏ, ẏ)| per level with ÿ from the grid stencil.
  GenNum residual;
};

/// Shooting on [0,1] per level: Newton on c0 with an FD Jacobian.
template <int D>
GeodesicResult geodesic_bvp(const RegularizedMetric<D>& rg, const Vec& p, const Vec& q, const GeodesicOptions& opt = {}) {
  if (p.size() != D || q.size() != D) throw PreconditionError("geodesic_bvp: wrong dimension");
  const std::size_t K = rg.gauge().size(), N = opt.rk4_steps + 1;
  std::vector<Mat> U(K), V(K);
  std::vector<Vec> c0(K);
  for (std::size_t k = 0; k < K; ++k) {
    auto shoot = [&](const Vec& c) -> Vec {
      return detail::geodesic_shoot<D>(rg, k, p, c, 1.0, opt, nullptr, nullptr);
    };
    // Levels are solved in order; the previous level's velocity is a much
    // closer start than the straight line, which remains the fallback.
    auto res = detail::newton_shoot(shoot, k > 0 ? c0[k - 1] : Vec(q - p), q, opt.newton_tol, opt.max_iterations,
                                    k > 0 ? 1 : 0, false);
    if (!res.converged && k > 0) {
      res = detail::newton_shoot(shoot, Vec(q - p), q, opt.newton_tol, opt.max_iterations, 0, false);
    }
    if (!res.converged) {
      std::ostringstream msg;
      msg << "geodesic shooting failed at level " << k + 1 << " (eps=" << rg.gauge().eps(k) << "): residual "
          << res.residual << " after " << res.iterations << " iterations";
      throw SolverError(msg.str());
    }
    detail::geodesic_shoot<D>(rg, k, p, res.c, 1.0, opt, &U[k], &V[k]);
    c0[k] = res.c;
  }
  Trajectory tr(IntervalDomain::constant(rg.gauge_ptr(), 0.0, 1.0), D, N, std::move(U), std::move(V));
  GenVec init;
  for (int i = 0; i < D; ++i) init.push_back(GenNum::from_index(rg.gauge_ptr(), [&](std::size_t k) { return c0[k](i); }));
  // p = q: the constant curve has no regular parametrization, its length is 0.
  const bool at_rest = std::all_of(c0.begin(), c0.end(), [](const Vec& c) { return c.isZero(0.0); });
  GenNum len = at_rest ? GenNum::constant(rg.gauge_ptr(), 0.0) : length(rg, tr);
  GenNum drift = GenNum::from_index(rg.gauge_ptr(), [&](std::size_t k) {
    auto speed = [&](std::size_t i) {
      const Eigen::Matrix<double, D, 1> y = tr.u(k, i), v = tr.v(k, i);
      return v.dot(rg.metric(k, y) * v);
    };
    const double s0 = speed(0);
    double m = 0.0;
    for (std::size_t i = 1; i < N; ++i) m = std::max(m, std::fabs(speed(i) - s0));
    return m;
  });
  GenNum resid = GenNum::from_index(rg.gauge_ptr(), [&](std::size_t k) {
    double m = 0.0;
    for (int c = 0; c < D; ++c) {
      std::vector<double> row(N);
      for (std::size_t i = 0; i < N; ++i) row[i] = tr.v(k)(c, static_cast<Eigen::Index>(i));
      const auto acc = fd::d_dt(row, tr.step(k));
      for (std::size_t i = 0; i < N; ++i) {
        const Eigen::Matrix<double, D, 1> y = tr.u(k, i), v = tr.v(k, i);
        m = std::max(m, std::fabs(acc[i] - rg.acceleration(k, y, v)(c)));
      }
    }
    return m;
  });
  return {std::move(tr), std::move(init), std::move(len), std::move(drift), std::move(resid)};
}

struct StandardLength {
  StandardPartReport report;
  /// |st(L) - oracle| when an oracle length is supplied.
  std::optional<double> oracle_gap;
};

/// st(L_g̃(y)); throws NoStandardPart when the length samples have no limit.
inline StandardLength standard_length(const GenNum& len, std::optional<double> oracle = std::nullopt) {
  StandardLength out{standard_part_report(len), std::nullopt};
  if (!out.report.exists) throw NoStandardPart(out.report.message);
  if (oracle) out.oracle_gap = std::fabs(out.report.value - *oracle);
  return out;
}

inline StandardLength standard_length(const GeodesicResult& res, std::optional<double> oracle = std::nullopt) {
  return standard_length(res.length, oracle);
}

/// Energy Lagrangian F(t, l, v) = ½ g^ε(l)(v, v) with analytic partials.
template <int D>
Lagrangian energy_lagrangian(std::shared_ptr<const RegularizedMetric<D>> rg) {
  using VecD = Eigen::Matrix<double, D, 1>;
  Lagrangian::Analytic a;
  a.Fu = [rg](std::size_t k, double, const Vec& u, const Vec& v) {
    const auto J = rg->jet(k, VecD(u), 2);
    Vec out(D);
    for (int i = 0; i < D; ++i) out(i) = 0.5 * v.dot(J.dg[i] * v);
    return out;
  };
  a.Fv = [rg](std::size_t k, double, const Vec& u, const Vec& v) { return Vec(rg->jet(k, VecD(u), 2).g * v); };
  a.Fvt = [](std::size_t, double, const Vec&, const Vec&) { return Vec(Vec::Zero(D)); };
  a.Fvv = [rg](std::size_t k, double, const Vec& u, const Vec&) { return Mat(rg->jet(k, VecD(u), 2).g); };
  a.Fuv = [rg](std::size_t k, double, const Vec& u, const Vec& v) {
    const auto J = rg->jet(k, VecD(u), 2);
    Mat out(D, D);
    for (int i = 0; i < D; ++i) out.row(i) = (J.dg[i] * v).transpose();
    return out;
  };
  a.Fuu = [rg](std::size_t k, double, const Vec& u, const Vec& v) {
    const auto J = rg->jet(k, VecD(u), 2);
    Mat out(D, D);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) out(i, j) = 0.5 * v.dot(J.d2g[i][j] * v);
    return out;
  };
  return Lagrangian(
      rg->gauge_ptr(), D,
      [rg](std::size_t k, double, const Vec& u, const Vec& v) { return 0.5 * v.dot(rg->jet(k, VecD(u), 2).g * v); }, a,
      "energy");
}

/// Necessary-condition report for a curve with respect to the energy functional of g^ε.
template <int D>
MinimizerReport minimality_report(std::shared_ptr<const RegularizedMetric<D>> rg, const Trajectory& curve,
                                  const MinimizerOptions& opt = {}) {
  return minimizer_report(energy_lagrangian<D>(std::move(rg)), curve, opt);
}

}  // namespace gsfc
