#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>

#include "gsfcalc/embedding.hpp"
#include "gsfcalc/gsf.hpp"
#include "gsfcalc/mollifier.hpp"
#include "oracles/tanh_sinh.hpp"

using namespace gsfc;

namespace {

GaugePtr G() {
  static const GaugePtr g = default_gauge();
  return g;
}

GenNum C(double c) { return GenNum::constant(G(), c); }

double bump(double x) {
  if (!(std::fabs(x) < 1.0)) return 0.0;
  return std::exp(-1.0 / ((1.0 - x) * (1.0 + x)));
}

/// Unit-mass kernel with vanishing moments 1..j, built from monomial moments
/// computed by tanh-sinh. Independent of the library's Legendre solve.
std::function<double(double)> oracle_kernel(int j) {
  const int n = j + 1;
  Eigen::MatrixXd A(n, n);
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < n; ++i)
      A(a, i) = oracle::tanh_sinh([&](double x) { return std::pow(x, a + i) * bump(x); }, -1.0, 1.0);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(0) = 1.0;
  const Eigen::VectorXd c = A.fullPivLu().solve(rhs);
  return [c](double x) {
    double p = 0.0;
    for (Eigen::Index i = c.size(); i-- > 0;) p = p * x + c(i);
    return p * bump(x);
  };
}

double moment(const Mollifier& m, int a) {
  return oracle::tanh_sinh([&](double x) { return std::pow(x, a) * m(x); }, -1.0, 1.0);
}

/// ∫|ψ| split at the kernel's zeros, located by a coarse scan and bisection.
double abs_mass(const Mollifier& m) {
  std::vector<double> pts{-1.0};
  for (int i = 1; i < 400; ++i) {
    double lo = -1.0 + (i - 1) / 200.0, hi = -1.0 + i / 200.0;
    if (i == 1 || (m(lo) < 0.0) == (m(hi) < 0.0)) continue;
    const bool neg_lo = m(lo) < 0.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      ((m(mid) < 0.0) == neg_lo ? lo : hi) = mid;
    }
    pts.push_back(0.5 * (lo + hi));
  }
  pts.push_back(1.0);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    s += std::fabs(oracle::tanh_sinh([&](double x) { return m(x); }, pts[i], pts[i + 1]));
  return s;
}

Mollifier kernel(int j, std::optional<double> d = std::nullopt, double eta = 10.0) {
  return build_mollifier(MollifierSpec{j, eta, d});
}

GsfFamily value_only(const GsfFamily& f) {
  return GsfFamily(f.gauge_ptr(), 1, 1, [f](std::size_t k, const Vec& x) { return f.value(k, x); });
}

/// φ(x) = bump(2x - 3), supported in [1, 2].
TestFunction bump_on_1_2() {
  return {[](double x, int) { return bump(2.0 * x - 3.0); }, 1.0, 2.0};
}

}  // namespace

TEST(Mollifier, OrderZeroIsNormalizedBump) {
  const Mollifier m = kernel(0);
  EXPECT_EQ(m.degree(), 0);
  EXPECT_NEAR(moment(m, 0), 1.0, 1e-12);
  EXPECT_NEAR(abs_mass(m), 1.0, 1e-12);
  for (int i = -100; i <= 100; ++i) EXPECT_GE(m(i / 100.0), 0.0);
  const MomentReport r = verify_moments(m);
  EXPECT_LE(r.mass_error, 1e-12);
  EXPECT_NEAR(r.abs_mass, 1.0, 1e-12);
}

TEST(Mollifier, OrderTwoMatchesIndependentSolve) {
  const Mollifier m = kernel(2);
  const auto ref = oracle_kernel(2);
  for (int i = -20; i <= 20; ++i) {
    const double x = i / 20.5;
    EXPECT_NEAR(m(x), ref(x), 1e-11 * std::max(1.0, std::fabs(ref(x)))) << x;
  }
  EXPECT_NEAR(moment(m, 0), 1.0, 1e-12);
  EXPECT_LE(std::fabs(moment(m, 1)), 1e-10);
  EXPECT_LE(std::fabs(moment(m, 2)), 1e-10);
  // Unit mass with a vanishing second moment forces a sign change.
  EXPECT_GT(abs_mass(m), 1.0 + 1e-3);
  EXPECT_LT(m(0.95), 0.0);
}

TEST(Mollifier, OrderOneIsConstantTimesBump) {
  const Mollifier m = kernel(1), m0 = kernel(0);
  ASSERT_EQ(m.degree(), 1);
  EXPECT_LE(std::fabs(m.coefficients()[1]), 1e-12);
  for (int i = -10; i <= 10; ++i) EXPECT_NEAR(m(i / 10.5), m0(i / 10.5), 1e-12);
}

TEST(Mollifier, OrderFourMoments) {
  const Mollifier m = kernel(4);
  const MomentReport r = verify_moments(m);
  EXPECT_LE(r.max_moment_violation, 1e-10);
  EXPECT_LE(r.mass_error, 1e-12);
  EXPECT_EQ(r.support_violation, 0.0);
  EXPECT_TRUE(r.within_budget);
  for (int a = 1; a <= 4; ++a) EXPECT_LE(std::fabs(moment(m, a)), 1e-10) << a;
  EXPECT_NEAR(moment(m, 0), 1.0, 1e-12);
  EXPECT_NEAR(r.abs_mass, abs_mass(m), 1e-10);
}

TEST(Mollifier, HighOrdersStayWithinTolerance) {
  for (int j : {6, 8, 10, 12}) {
    const Mollifier m = kernel(j, std::nullopt, 1e6);
    const MomentReport r = verify_moments(m);
    EXPECT_LE(r.mass_error, 1e-12) << j;
    EXPECT_LE(r.max_moment_violation, 1e-10) << j;
    EXPECT_LT(m.condition_number(), 1e12);
  }
}

TEST(Mollifier, LeftMassHalfGivesEvenPolynomial) {
  const Mollifier m = kernel(2, 0.5);
  const MomentReport r = verify_moments(m);
  ASSERT_TRUE(r.left_mass_error.has_value());
  EXPECT_LE(*r.left_mass_error, 1e-10);
  EXPECT_LE(r.max_moment_violation, 1e-10);
  for (std::size_t i = 1; i < m.coefficients().size(); i += 2) EXPECT_LE(std::fabs(m.coefficients()[i]), 1e-12) << i;
  EXPECT_NEAR(oracle::tanh_sinh([&](double x) { return m(x); }, -1.0, 0.0), 0.5, 1e-10);
}

TEST(Mollifier, AsymmetricLeftMass) {
  for (int j : {0, 1, 3}) {
    const Mollifier m = kernel(j, 0.3);
    EXPECT_NEAR(oracle::tanh_sinh([&](double x) { return m(x); }, -1.0, 0.0), 0.3, 1e-10) << j;
    EXPECT_NEAR(moment(m, 0), 1.0, 1e-12);
    for (int a = 1; a <= j; ++a) EXPECT_LE(std::fabs(moment(m, a)), 1e-10);
  }
}

TEST(Mollifier, Errors) {
  try {
    (void)kernel(4, std::nullopt, 0.01);
    FAIL();
  } catch (const ConstructionError& e) {
    EXPECT_NE(std::string(e.what()).find("negative-part budget exceeded"), std::string::npos);
  }
  EXPECT_THROW((void)kernel(13), ConstructionError);
  EXPECT_THROW((void)kernel(-1), ConstructionError);
  EXPECT_THROW((void)kernel(2, 1.0), ConstructionError);
  EXPECT_THROW((void)kernel(2, 0.0), ConstructionError);
  EXPECT_THROW((void)build_mollifier(MollifierSpec{0, 0.0, std::nullopt}), ConstructionError);
}

TEST(Mollifier, SupportAndCumulative) {
  const Mollifier m = kernel(3);
  for (double x : {-1.0, 1.0, 1.2, -3.0}) {
    EXPECT_EQ(m(x), 0.0);
    EXPECT_EQ(m.derivative(x, 2), 0.0);
  }
  for (double x : {-0.7, -0.2, 0.0, 0.45, 0.99}) {
    EXPECT_NEAR(m.cumulative(x), oracle::tanh_sinh([&](double s) { return m(s); }, -1.0, x), 1e-12) << x;
  }
  EXPECT_EQ(m.cumulative(-2.0), 0.0);
  EXPECT_NEAR(m.cumulative(2.0), 1.0, 1e-12);
}

TEST(Mollifier, KernelDerivativesMatchFiniteDifferences) {
  const Mollifier m = kernel(2);
  for (double x : {-0.6, 0.1, 0.8}) {
    for (int n = 1; n <= 3; ++n) {
      const double fd = fd::derivative([&](double s) { return m.derivative(s, n - 1); }, x, 1e-3);
      EXPECT_NEAR(m.derivative(x, n), fd, 1e-7 * std::max(1.0, std::fabs(fd))) << x << " " << n;
    }
  }
}

TEST(Embed, DiracAtZero) {
  const Mollifier m = kernel(0);
  const auto params = EmbeddingParams::power(G(), 1.0);
  const GenNum v = evaluate(embed(Distribution::dirac(), params, m), C(0.0));
  for (std::size_t k = 0; k < G()->size(); ++k) EXPECT_NEAR(v[k], params.b(k) * m(0.0), 1e-12 * v[k]);
  const AsymptoticReport r = classify(v);
  EXPECT_EQ(r.verdict, Verdict::moderate);
  EXPECT_NEAR(r.estimated_order, -1.0, 1e-9);
  EXPECT_EQ(r.N, 1);
  const auto half = EmbeddingParams::power(G(), 0.5);
  EXPECT_NEAR(classify(evaluate(embed(Distribution::dirac(), half, m), C(0.0))).estimated_order, -0.5, 1e-9);
}

TEST(Embed, HeavisideWithLeftMass) {
  const Mollifier m = kernel(2, 0.5);
  const GenNum v = evaluate(embed(Distribution::heaviside(), EmbeddingParams::power(G()), m), C(0.0));
  for (std::size_t k = 0; k < v.size(); ++k) EXPECT_NEAR(v[k], 0.5, 1e-10);
  EXPECT_NEAR(standard_part(v), 0.5, 1e-10);
  const Mollifier m3 = kernel(0, 0.3);
  EXPECT_NEAR(evaluate(embed(Distribution::heaviside(0.2), EmbeddingParams::power(G()), m3), C(0.2)).last(), 0.3, 1e-10);
}

TEST(Embed, SmoothPolynomialIsReproduced) {
  const auto params = EmbeddingParams::power(G());
  const auto f = [](double x) { return x * x; };
  for (int j : {2, 3, 4}) {
    const GsfFamily e = embed(Distribution::function(f), params, kernel(j));
    for (double x : {-0.7, 0.0, 0.35, 1.5}) {
      const GenNum v = evaluate(e, C(x));
      if (x != 0.0) {
        EXPECT_TRUE(gen_eq(v, C(x * x))) << j << " " << x;
      } else {
        // Exact value 0: samples are moment roundoff times b^-2, which no relative test can call negligible.
        for (std::size_t k = 0; k < v.size(); ++k) EXPECT_LE(std::fabs(v[k]), 1e-15 / (params.b(k) * params.b(k)));
      }
      for (std::size_t k : {std::size_t{0}, std::size_t{5}}) {
        const double b = params.b(k);
        const Mollifier m = kernel(j);
        const double ref = oracle::tanh_sinh([&](double z) { return f(x - z / b) * m(z); }, -1.0, 1.0);
        EXPECT_NEAR(v[k], ref, 1e-13);
      }
    }
  }
  // With j = 1 the second moment survives: ι(x²) = x² + m₂/b².
  const Mollifier m1 = kernel(1);
  const double m2 = moment(m1, 2);
  const GenNum v = evaluate(embed(Distribution::function(f), params, m1), C(0.5));
  for (std::size_t k = 0; k < v.size(); ++k) EXPECT_NEAR(v[k], 0.25 + m2 / (params.b(k) * params.b(k)), 1e-13);
  EXPECT_FALSE(gen_eq(v, C(0.25)));
}

TEST(Embed, LocallyIntegrableFunctionWithKink) {
  const auto params = EmbeddingParams::power(G());
  const Mollifier m = kernel(2);
  const GsfFamily e = embed(Distribution::function([](double x) { return std::fabs(x); }, {0.0}), params, m);
  const GenNum at0 = evaluate(e, C(0.0));
  const double m1abs = 2.0 * oracle::tanh_sinh([&](double z) { return z * m(z); }, 0.0, 1.0);
  for (std::size_t k = 0; k < at0.size(); ++k) EXPECT_NEAR(at0[k], m1abs / params.b(k), 1e-13);
  // Away from the kink, the kernel support eventually avoids 0 and moments kill the error.
  EXPECT_NEAR(evaluate(e, C(0.5)).last(), 0.5, 1e-14);
  EXPECT_THROW((void)embed(Distribution::function([](double x) { return 1.0 / (x * x); }), params, m), ConstructionError);
  EXPECT_THROW((void)embed(Distribution::function([](double x) { return 1.0 / std::fabs(x); }), params, m), ConstructionError);
  EXPECT_NO_THROW((void)embed(Distribution::function([](double x) { return 1.0 / std::sqrt(std::fabs(x)); }, {0.0}), params, m));
}

TEST(WeakLimit, DeltaAgainstGaussian) {
  const auto params = EmbeddingParams::power(G(), 0.25);
  const WeakLimitReport r = weak_limit_check(Distribution::dirac(), params, kernel(4), TestFunction::gaussian());
  EXPECT_DOUBLE_EQ(r.exact, 1.0);
  EXPECT_TRUE(r.decreasing_tail);
  EXPECT_LE(r.final_error, 1e-10);
  EXPECT_NEAR(r.pairing.last(), 1.0, 1e-10);
  // Independent pairing at the coarsest level: ∫ b ψ(b x) e^{-x²} dx.
  const Mollifier m = kernel(4);
  const double b0 = params.b(0);
  const double ref = oracle::tanh_sinh([&](double z) { return m(z) * std::exp(-z * z / (b0 * b0)); }, -1.0, 1.0);
  EXPECT_NEAR(r.pairing[0], ref, 1e-13);
  // The error decays like b^{-6} = ε^{1.5} (odd moments vanish by symmetry).
  EXPECT_NEAR(r.rate, 1.5, 0.05);
}

TEST(WeakLimit, HeavisideAwayFromJump) {
  const TestFunction phi = bump_on_1_2();
  const WeakLimitReport r = weak_limit_check(Distribution::heaviside(), EmbeddingParams::power(G()), kernel(0), phi);
  const double ref = oracle::tanh_sinh([&](double x) { return phi(x); }, 1.0, 2.0);
  EXPECT_NEAR(r.exact, ref, 1e-12);
  for (std::size_t k = 0; k < r.error.size(); ++k) EXPECT_LE(r.error[k], 1e-12) << k;
}

TEST(WeakLimit, DeltaPrimeAgainstXGaussian) {
  const auto params = EmbeddingParams::power(G(), 0.25);
  const WeakLimitReport r =
      weak_limit_check(Distribution::dirac().derivative(), params, kernel(4), TestFunction::x_gaussian());
  EXPECT_DOUBLE_EQ(r.exact, -1.0);
  EXPECT_TRUE(r.decreasing_tail);
  EXPECT_LE(r.final_error, 1e-10);
  EXPECT_NEAR(standard_part(r.pairing), -1.0, 1e-9);
  // Direct pairing through the embedded family at the coarsest level.
  const GsfFamily e = embed(Distribution::dirac().derivative(), params, kernel(4));
  const double b0 = params.b(0);
  const double direct = oracle::tanh_sinh(
      [&](double x) { return e.value(0, Vec::Constant(1, x))(0) * x * std::exp(-x * x); }, -1.0 / b0, 1.0 / b0);
  EXPECT_NEAR(r.pairing[0], direct, 1e-12);
}

TEST(EmbedProperties, ScalingAlgebra) {
  const Mollifier m = kernel(2);
  const std::function<double(double)> psi = [&](double y) { return m(y); };
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> rr(0.05, 3.0), xs(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const double r = rr(rng), x = xs(rng), y = xs(rng);
    const double lhs = dilate(r, translate(x, psi))(y);
    const double rhs = translate(r * x, dilate(r, psi))(y);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::fabs(lhs)));
  }
}

TEST(EmbedProperties, DerivativeCommutes) {
  const auto params = EmbeddingParams::power(G(), 0.25);
  const Mollifier m = kernel(2);
  const auto sgn = [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); };
  struct Case {
    Distribution T, dT;
  };
  const std::vector<Case> cases{
      {Distribution::dirac(0.1), Distribution::dirac(0.1).derivative()},
      {Distribution::heaviside(), Distribution::dirac()},
      {Distribution::function([](double x) { return std::fabs(x); }, {0.0}), Distribution::function(sgn, {0.0})},
  };
  for (const Case& c : cases) {
    const GsfFamily e = embed(c.T, params, m), de = embed(c.dT, params, m);
    for (double x : {-0.3, 0.05, 0.2}) {
      const GenNum analytic = evaluate(derivative(e), C(x));
      const GenNum expected = evaluate(de, C(x));
      EXPECT_TRUE(gen_eq(analytic, expected)) << x;
      const GenNum numeric = evaluate(derivative(value_only(e)), C(x));
      for (std::size_t k = 0; k < numeric.size(); ++k) {
        EXPECT_NEAR(numeric[k], expected[k], 1e-6 * std::max(1.0, std::fabs(expected[k]))) << x << " " << k;
      }
    }
  }
}

TEST(EmbedProperties, SupportPreserved) {
  const auto params = EmbeddingParams::power(G());
  const GsfFamily e = embed(Distribution::dirac(0.3), params, kernel(3));
  for (double s : {1.0, 1.001, 2.0}) {
    const GenNum right = GenNum::from_index(G(), [&](std::size_t k) { return 0.3 + s / params.b(k); });
    const GenNum left = GenNum::from_index(G(), [&](std::size_t k) { return 0.3 - s / params.b(k); });
    const GenNum vr = evaluate(e, right), vl = evaluate(e, left);
    for (std::size_t k = 0; k < vr.size(); ++k) {
      EXPECT_EQ(vr[k], 0.0);
      EXPECT_EQ(vl[k], 0.0);
    }
  }
  const GenNum inside = GenNum::from_index(G(), [&](std::size_t k) { return 0.3 + 0.5 / params.b(k); });
  EXPECT_GT(evaluate(e, inside).last(), 0.0);
}

TEST(EmbedProperties, Linearity) {
  const auto params = EmbeddingParams::power(G(), 0.5);
  const Mollifier m = kernel(2);
  const Distribution S = Distribution::dirac(0.1), T = Distribution::heaviside(-0.2),
                     U = Distribution::function([](double x) { return std::cos(x); });
  const GsfFamily combo = embed(2.0 * S + (-3.0) * T + 0.5 * U, params, m);
  const GsfFamily eS = embed(S, params, m), eT = embed(T, params, m), eU = embed(U, params, m);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> xs(-0.5, 0.5);
  for (int i = 0; i < 20; ++i) {
    const double x = xs(rng);
    const GenNum lhs = evaluate(combo, C(x));
    const GenNum rhs = 2.0 * evaluate(eS, C(x)) - 3.0 * evaluate(eT, C(x)) + 0.5 * evaluate(eU, C(x));
    for (std::size_t k = 0; k < lhs.size(); ++k) EXPECT_NEAR(lhs[k], rhs[k], 1e-12 * std::max(1.0, std::fabs(rhs[k])));
  }
}

TEST(EmbedProperties, SmoothFunctionRate) {
  const auto params = EmbeddingParams::power(G(), 0.25);
  const auto f = [](double x) { return std::cos(x) + std::exp(0.5 * x); };
  for (int j = 1; j <= 4; ++j) {
    const GsfFamily e = embed(Distribution::function(f), params, kernel(j));
    for (double x : {-0.4, 0.3}) {
      const GenNum v = evaluate(e, C(x));
      std::vector<double> lb, le;
      for (std::size_t k = G()->tail_begin(); k < v.size(); ++k) {
        lb.push_back(std::log(params.b(k)));
        le.push_back(std::log(std::fabs(v[k] - f(x))));
      }
      const double slope = detail::slope_fit(lb, le).first;
      // Symmetric bump: even j also kills moment j+1, so the rate can exceed j+1.
      EXPECT_LE(slope, -(j + 1) + 0.1) << j << " " << x;
    }
  }
}
