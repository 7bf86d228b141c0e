#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "gsfcalc/linear_ode.hpp"

using namespace gsfc;

namespace {

GaugePtr G() {
  static const GaugePtr g = default_gauge();
  return g;
}

IntervalDomain I(double a, double b) { return IntervalDomain::constant(G(), a, b); }

/// Time → d×d family from a per-level matrix function, flattened column-major.
GsfFamily matrix_family(int d, std::function<Mat(std::size_t, double)> A) {
  return GsfFamily(G(), 1, d * d, [A, d](std::size_t k, const Vec& t) {
    const Mat m = A(k, t(0));
    return Vec(Eigen::Map<const Vec>(m.data(), d * d));
  });
}

/// Classical RK4 for y' = A(t) y with n steps, independent of the library loop.
Vec rk4(const std::function<Mat(double)>& A, Vec y, double a, double b, int n) {
  const double h = (b - a) / n;
  for (int i = 0; i < n; ++i) {
    const double t = a + i * h;
    const Vec k1 = A(t) * y;
    const Vec k2 = A(t + h / 2) * (y + h / 2 * k1);
    const Vec k3 = A(t + h / 2) * (y + h / 2 * k2);
    const Vec k4 = A(t + h) * (y + h * k3);
    y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return y;
}

}  // namespace

TEST(LogBound, Examples) {
  const LogBoundReport id = log_bound_check(matrix_family(2, [](std::size_t, double) { return Mat(Mat::Identity(2, 2)); }), I(0, 1));
  EXPECT_TRUE(id.pass);
  for (std::size_t k = 0; k < G()->size(); ++k) EXPECT_NEAR(id.max_norm[k], 1.0, 1e-12);
  for (std::size_t k = 1; k < G()->size(); ++k) EXPECT_LT(id.ratio[k], id.ratio[k - 1]);

  const LogBoundReport inv = log_bound_check(
      matrix_family(2, [](std::size_t k, double) { return Mat(Mat::Identity(2, 2) / G()->eps(k)); }), I(0, 1));
  EXPECT_FALSE(inv.pass);
  EXPECT_GT(inv.slope, 0.5);

  const LogBoundReport lg = log_bound_check(
      matrix_family(2, [](std::size_t k, double) { return Mat(std::log(1.0 / G()->eps(k)) * Mat::Identity(2, 2)); }), I(0, 1));
  EXPECT_TRUE(lg.pass);
  EXPECT_NEAR(lg.C, 1.0, 1e-12);
  for (std::size_t k = 0; k < G()->size(); ++k) EXPECT_NEAR(lg.ratio[k], 1.0, 1e-12);
}

TEST(LogBound, UsesTheMaximumOverTime) {
  // ∫_0^t cos = sin t peaks at π/2 inside [0, 3].
  const LogBoundReport r = log_bound_check(matrix_family(1, [](std::size_t, double t) { return Mat(Mat::Constant(1, 1, std::cos(t))); }), I(0, 3));
  EXPECT_NEAR(r.max_norm.last(), 1.0, 1e-6);
}

TEST(MatrixExp, ZeroGenerator) {
  const Vec y0 = Eigen::Vector3d(1.0, -2.0, 0.5);
  const LinearOdeSolution s = matrix_exp_solution(matrix_family(3, [](std::size_t, double) { return Mat(Mat::Zero(3, 3)); }), I(0, 2), y0);
  for (const Mat& Y : s.y)
    for (Eigen::Index i = 0; i < Y.cols(); ++i) EXPECT_EQ((Y.col(i) - y0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MatrixExp, ScalarTimesIdentity) {
  const auto a = [](std::size_t k, double t) { return std::cos(t) + G()->eps(k); };
  const GsfFamily A = matrix_family(2, [a](std::size_t k, double t) { return Mat(a(k, t) * Mat::Identity(2, 2)); });
  const Vec y0 = Eigen::Vector2d(1.0, 3.0);
  const LinearOdeSolution s = matrix_exp_solution(A, I(0, 2), y0);
  for (std::size_t k = 0; k < G()->size(); ++k) {
    const double e = G()->eps(k);
    const Mat& Y = s.y[k];
    const Eigen::Index n = Y.cols();
    for (Eigen::Index i = 0; i < n; i += 128) {
      const double t = 2.0 * i / (n - 1);
      EXPECT_LE((Y.col(i) - std::exp(std::sin(t) + e * t) * y0).cwiseAbs().maxCoeff(), 1e-12) << k << " " << t;
    }
    const Vec ref = rk4([&](double t) { return Mat(a(k, t) * Mat::Identity(2, 2)); }, y0, 0.0, 2.0, 4096);
    EXPECT_LE((Y.col(n - 1) - ref).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE(s.rk4_discrepancy[k], 1e-8);
  }
}

TEST(MatrixExp, CommutingRotation) {
  // A(t) = cos t · J with J the rotation generator: y(t) = R(sin t) y0.
  Mat J(2, 2);
  J << 0, -1, 1, 0;
  const LinearOdeSolution s = matrix_exp_solution(matrix_family(2, [J](std::size_t, double t) { return Mat(std::cos(t) * J); }), I(0, 3), Eigen::Vector2d(1.0, 0.0));
  const Mat& Y = s.y.back();
  const Eigen::Index n = Y.cols();
  for (Eigen::Index i = 0; i < n; i += 64) {
    const double th = std::sin(3.0 * i / (n - 1));
    EXPECT_NEAR(Y(0, i), std::cos(th), 1e-12);
    EXPECT_NEAR(Y(1, i), std::sin(th), 1e-12);
  }
}

TEST(MatrixExp, ZeroInitialValue) {
  const GsfFamily A = matrix_family(2, [](std::size_t, double t) { return Mat(std::sin(t) * Mat::Identity(2, 2)); });
  const LinearOdeSolution s = matrix_exp_solution(A, I(0, 1), Vec::Zero(2));
  for (const Mat& Y : s.y) EXPECT_EQ(Y.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MatrixExp, Refusals) {
  try {
    (void)matrix_exp_solution(matrix_family(2,
                                            [](std::size_t, double t) {
                                              Mat m(2, 2);
                                              m << 0, 1, t, 0;
                                              return m;
                                            }),
                              I(0, 1), Eigen::Vector2d(1.0, 0.0));
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("exponential formula inapplicable"), std::string::npos);
  }
  EXPECT_THROW((void)matrix_exp_solution(matrix_family(1, [](std::size_t k, double) { return Mat(Mat::Constant(1, 1, 1.0 / G()->eps(k))); }),
                                         I(0, 1), Vec::Ones(1)),
               PreconditionError);
  EXPECT_THROW((void)matrix_exp_solution(matrix_family(2, [](std::size_t, double) { return Mat(Mat::Zero(2, 2)); }), I(0, 1), Vec::Ones(3)),
               PreconditionError);
  EXPECT_THROW((void)detail::as_matrix(Vec::Ones(3)), PreconditionError);
}
