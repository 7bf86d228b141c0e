#include <gtest/gtest.h>

#include <cfloat>
#include <cmath>
#include <numbers>
#include <random>

#include "gsfcalc/embedding.hpp"
#include "gsfcalc/gsf.hpp"
#include "oracles/tanh_sinh.hpp"

using namespace gsfc;

namespace {

const double kPi = std::numbers::pi;

GaugePtr G() {
  static const GaugePtr g = default_gauge();
  return g;
}

GenNum C(double c) { return GenNum::constant(G(), c); }
GenNum E(double p = 1.0) {
  return GenNum::from_eps(G(), [p](double e, double) { return std::pow(e, p); });
}

Vec v1(double x) { return Vec::Constant(1, x); }

/// ε-independent scalar family with optional analytic derivatives.
GsfFamily scalar(std::function<double(double)> f, std::function<double(double, int)> df = {}) {
  Evaluator e = [f](std::size_t, const Vec& x) { return v1(f(x(0))); };
  PartialEvaluator p;
  if (df) p = [df](std::size_t, const Vec& x, const MultiIndex& a) { return v1(df(x(0), a[0])); };
  return make_gsf(G(), 1, 1, e, p);
}

/// Gaussian with standard deviation σ_ε = ε.
GsfFamily gaussian_eps() {
  auto g = G();
  return make_gsf(g, 1, 1, [g](std::size_t k, const Vec& x) {
    const double s = g->eps(k);
    return v1(std::exp(-x(0) * x(0) / (2 * s * s)) / (s * std::sqrt(2 * kPi)));
  });
}

double rel(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

}  // namespace

TEST(MakeGsf, Examples) {
  const GsfFamily sq = scalar([](double x) { return x * x; });
  EXPECT_EQ(evaluate(sq, C(3.0)).last(), 9.0);
  const GenNum g0 = evaluate(gaussian_eps(), C(0.0));
  for (std::size_t k = 0; k < G()->size(); ++k) EXPECT_NEAR(g0[k] * G()->eps(k) * std::sqrt(2 * kPi), 1.0, 1e-14);
  const auto rep = classify(g0);
  EXPECT_EQ(rep.verdict, Verdict::moderate);
  EXPECT_EQ(rep.N, 1);
  auto g = G();
  try {
    (void)make_gsf(g, 1, 1, [g](std::size_t k, const Vec& x) { return v1(std::exp(1.0 / g->eps(k)) * x(0)); });
    FAIL();
  } catch (const ConstructionError& e) {
    EXPECT_NE(std::string(e.what()).find("not rho-moderate on probes"), std::string::npos);
  }
}

TEST(Evaluate, Examples) {
  const GsfFamily id = scalar([](double x) { return x; });
  EXPECT_TRUE(gen_eq(evaluate(id, E()), E()));
  const GenNum at1 = evaluate(gaussian_eps(), C(1.0));
  for (std::size_t k = 0; k < 6; ++k) {
    const double e = G()->eps(k);
    EXPECT_NEAR(at1[k], std::exp(-1.0 / (2 * e * e)) / (e * std::sqrt(2 * kPi)), 1e-300);
  }
  EXPECT_EQ(classify(at1).verdict, Verdict::negligible);
  EXPECT_EQ(evaluate(scalar([](double x) { return x * x; }), C(-2.0)).last(), 4.0);
}

TEST(Evaluate, DomainViolation) {
  auto g = G();
  const GsfFamily f(g, 1, 1, [](std::size_t, const Vec& x) { return x; }, {}, BoxDomain{{C(0.0)}, {C(1.0)}});
  EXPECT_THROW((void)evaluate(f, C(2.0)), DomainError);
}

TEST(Evaluate, RespectsRepresentatives) {
  const GsfFamily f = scalar([](double x) { return std::sin(x) * std::exp(x); });
  const GenNum x = 0.3 + E();
  const GenNum negl = GenNum::from_eps(G(), [](double e, double) { return std::exp(-1.0 / e); });
  EXPECT_TRUE(gen_eq(evaluate(f, x), evaluate(f, x + negl)));
}

TEST(Derivative, Examples) {
  const GsfFamily sq = scalar([](double x) { return x * x; });
  EXPECT_NEAR(evaluate(derivative(sq), C(3.0)).last(), 6.0, 1e-8);
  EXPECT_NEAR(evaluate(derivative(gaussian_eps()), C(0.0)).last(), 0.0, 1e-6);
  auto g = G();
  const GsfFamily s = make_gsf(g, 1, 1, [g](std::size_t k, const Vec& x) { return v1(std::sin(x(0) / g->eps(k))); });
  const GenNum d = evaluate(derivative(s), C(0.0));
  for (std::size_t k = 0; k < g->size(); ++k) EXPECT_LE(rel(d[k], 1.0 / g->eps(k)), 1e-6) << k;
  const auto rep = classify(d);
  EXPECT_EQ(rep.verdict, Verdict::moderate);
  EXPECT_EQ(rep.N, 1);
}

// Smooth ε-independent fixtures with known derivatives up to order 2.
struct Fixture {
  const char* name;
  std::function<double(double)> f;
  std::function<double(double, int)> df;
};

std::vector<Fixture> smooth_fixtures() {
  return {
      {"sin", [](double x) { return std::sin(x); },
       [](double x, int n) { return n % 4 == 0 ? std::sin(x) : n % 4 == 1 ? std::cos(x) : n % 4 == 2 ? -std::sin(x) : -std::cos(x); }},
      {"exp", [](double x) { return std::exp(x); }, [](double x, int) { return std::exp(x); }},
      {"cubic", [](double x) { return x * x * x - 2 * x; },
       [](double x, int n) { return n == 0 ? x * x * x - 2 * x : n == 1 ? 3 * x * x - 2 : n == 2 ? 6 * x : n == 3 ? 6.0 : 0.0; }},
      {"rational", [](double x) { return 1.0 / (1.0 + x * x); },
       [](double x, int n) {
         const double q = 1.0 + x * x;
         return n == 0 ? 1.0 / q : n == 1 ? -2 * x / (q * q) : (6 * x * x - 2) / (q * q * q);
       }},
  };
}

TEST(Derivative, AnalyticAndFiniteDifferenceAgree) {
  for (const auto& fx : smooth_fixtures()) {
    const GsfFamily an = scalar(fx.f, fx.df), fd = scalar(fx.f);
    for (int order = 1; order <= 2; ++order) {
      const GsfFamily da = derivative(an, order), dn = derivative(fd, order);
      for (double x : {-1.3, -0.2, 0.0, 0.7, 1.9}) {
        for (std::size_t k : {0ul, 9ul, 19ul}) {
          const double a = da.value(k, x), n = dn.value(k, x);
          EXPECT_LE(std::fabs(a - n), 1e-6 * std::max(1.0, std::fabs(a))) << fx.name << " order " << order << " x " << x;
          EXPECT_NEAR(a, fx.df(x, order), 1e-13);
        }
      }
    }
  }
}

TEST(Derivative, LinearityLeibnizChain) {
  const auto fx = smooth_fixtures();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (std::size_t i = 0; i < fx.size(); ++i) {
    const auto& f = fx[i];
    const auto& g = fx[(i + 1) % fx.size()];
    const GsfFamily sum = scalar([&](double x) { return f.f(x) + g.f(x); });
    const GsfFamily prod = scalar([&](double x) { return f.f(x) * g.f(x); });
    const GsfFamily comp = scalar([&](double x) { return f.f(g.f(x)); });
    const GsfFamily dsum = derivative(sum), dprod = derivative(prod), dcomp = derivative(comp);
    for (int r = 0; r < 8; ++r) {
      const double x = U(rng);
      const std::size_t k = 19;
      EXPECT_LE(rel(dsum.value(k, x), f.df(x, 1) + g.df(x, 1)), 1e-6);
      EXPECT_LE(rel(dprod.value(k, x), f.df(x, 1) * g.f(x) + f.f(x) * g.df(x, 1)), 1e-6);
      EXPECT_LE(rel(dcomp.value(k, x), f.df(g.f(x), 1) * g.df(x, 1)), 1e-6);
    }
  }
}

TEST(Derivative, DirectionalInTwoDimensions) {
  auto g = G();
  const GsfFamily f = make_gsf(g, 2, 1, [](std::size_t, const Vec& x) { return v1(x(0) * x(0) * x(1)); });
  const GenVec dir{C(1.0), C(2.0)};
  const GenVec at{C(1.0), C(3.0)};
  // ∇f = (2xy, x²) = (6, 1); directional = 6 + 2.
  EXPECT_NEAR(evaluate(directional_derivative(f, dir), at).front().last(), 8.0, 1e-7);
}

TEST(Integrate, Examples) {
  EXPECT_NEAR(integrate(scalar([](double s) { return s; }), C(0.0), C(1.0)).last(), 0.5, 1e-15);
  const Mollifier m = build_mollifier({2, 1.0, std::nullopt});
  const GsfFamily psi = embed(Distribution::dirac(), EmbeddingParams::power(G(), 0.25), m);
  const GenNum mass = integrate(psi, C(-1.0), C(1.0));
  for (std::size_t k = 0; k < G()->size(); ++k) EXPECT_NEAR(mass[k], 1.0, 1e-12);
  EXPECT_EQ(integrate(scalar([](double s) { return std::exp(s); }), C(0.4), C(0.4)).last(), 0.0);
}

TEST(Integrate, MatchesTanhSinhOracle) {
  auto g = G();
  const GsfFamily f = make_gsf(g, 1, 1, [g](std::size_t k, const Vec& x) {
    return v1(std::exp(-x(0) * x(0) / (0.1 + g->eps(k))) * std::cos(3 * x(0)));
  });
  const GenNum I = integrate(f, C(-2.0), E());
  for (std::size_t k : {0ul, 5ul, 19ul}) {
    const double e = g->eps(k);
    const double ref = oracle::tanh_sinh([e](double s) { return std::exp(-s * s / (0.1 + e)) * std::cos(3 * s); }, -2.0, e);
    EXPECT_NEAR(I[k], ref, 1e-12);
  }
}

TEST(Integrate, CalculusRules) {
  auto g = G();
  auto fam = [g](std::function<double(double, double)> h) {
    return make_gsf(g, 1, 1, [g, h](std::size_t k, const Vec& x) { return v1(h(g->eps(k), x(0))); });
  };
  const auto fe = [](double e, double s) { return std::cos(s) + e * s * s; };
  const auto ge = [](double e, double s) { return std::exp(-s * s) * (1.0 + e); };
  const auto dfe = [](double e, double s) { return -std::sin(s) + 2 * e * s; };
  const GsfFamily f = fam(fe), gg = fam(ge), df = fam(dfe);
  const GsfFamily fpg = fam([&](double e, double s) { return 2.5 * fe(e, s) + ge(e, s); });
  const GsfFamily fg_prime = fam([&](double e, double s) { return fe(e, s) * (-2 * s) * std::exp(-s * s) * (1.0 + e); });
  const GsfFamily f_prime_g = fam([&](double e, double s) { return dfe(e, s) * ge(e, s); });
  const GenNum a = C(-0.5), b = 1.0 + E(), c = C(2.0);
  const double tol = 1e-9;
  auto close = [&](const GenNum& x, const GenNum& y) {
    for (std::size_t k = 0; k < x.size(); ++k)
      if (std::fabs(x[k] - y[k]) > tol) return false;
    return true;
  };
  EXPECT_TRUE(close(integrate(fpg, a, b), 2.5 * integrate(f, a, b) + integrate(gg, a, b)));
  EXPECT_TRUE(close(integrate(f, a, b) + integrate(f, b, c), integrate(f, a, c)));
  EXPECT_TRUE(close(integrate(f, b, a), -integrate(f, a, b)));
  EXPECT_TRUE(close(integrate(f, b, b), C(0.0)));
  EXPECT_TRUE(close(integrate(df, a, b), evaluate(f, b) - evaluate(f, a)));
  // ∫ f g' = [f g] - ∫ f' g.
  EXPECT_TRUE(close(integrate(fg_prime, a, b),
                    evaluate(f, b) * evaluate(gg, b) - evaluate(f, a) * evaluate(gg, a) - integrate(f_prime_g, a, b)));
}

TEST(Integrate, ChangeOfVariables) {
  // φ(t) = t + t³/3 is monotone; ∫_{φ(a)}^{φ(b)} f = ∫_a^b f(φ) φ'.
  auto phi = [](double t) { return t + t * t * t / 3.0; };
  auto f = [](double s) { return std::sin(2 * s) + s * s; };
  const GsfFamily F = scalar(f);
  const GsfFamily pulled = scalar([&](double t) { return f(phi(t)) * (1.0 + t * t); });
  const GenNum a = C(-0.3), b = 0.8 + E();
  const GenNum lhs = integrate(F, a.map(phi), b.map(phi)), rhs = integrate(pulled, a, b);
  for (std::size_t k = 0; k < lhs.size(); ++k) EXPECT_NEAR(lhs[k], rhs[k], 1e-9);
}

TEST(Integrate, DifferentiationUnderTheIntegral) {
  // d/ds ∫_0^1 sin(sτ) dτ = ∫_0^1 τ cos(sτ) dτ.
  const GsfFamily I = scalar([](double s) {
    return quad::integral([s](double t) { return std::sin(s * t); }, 0.0, 1.0);
  });
  for (double s : {0.3, 1.1, 2.0}) {
    const double inner = oracle::tanh_sinh([s](double t) { return t * std::cos(s * t); }, 0.0, 1.0);
    EXPECT_NEAR(derivative(I).value(19, s), inner, 1e-8);
  }
}

TEST(NormM, Examples) {
  const IntervalDomain dom = IntervalDomain::constant(G(), 0.0, 1.0);
  EXPECT_NEAR(norm_m(scalar([](double t) { return t; }), dom, 1).last(), 1.0, 1e-9);
  auto g = G();
  const GsfFamily s = make_gsf(g, 1, 1, [g](std::size_t k, const Vec& x) { return v1(std::sin(x(0) / g->eps(k))); });
  const GenNum n = norm_m(s, dom, 1);
  for (std::size_t k = 0; k < g->size(); ++k) EXPECT_LE(rel(n[k], 1.0 / g->eps(k)), 1e-6);
  EXPECT_EQ(norm_m(scalar([](double) { return 0.0; }), dom, 2).last(), 0.0);
}

TEST(Extremum, Examples) {
  const Extremum sq = extremum(scalar([](double x) { return x * x; }), IntervalDomain::constant(G(), -1.0, 1.0));
  EXPECT_NEAR(sq.min.last(), 0.0, 1e-15);
  EXPECT_NEAR(sq.argmin.last(), 0.0, 1e-7);
  EXPECT_EQ(sq.max.last(), 1.0);
  EXPECT_EQ(std::fabs(sq.argmax.last()), 1.0);
  const Extremum s = extremum(scalar([](double x) { return std::sin(x); }), IntervalDomain::constant(G(), 0.0, kPi));
  EXPECT_NEAR(s.max.last(), 1.0, 1e-14);
  EXPECT_NEAR(s.argmax.last(), kPi / 2, 1e-7);
  const Extremum ga = extremum(gaussian_eps(), IntervalDomain::constant(G(), -1.0, 1.0));
  for (std::size_t k = 0; k < G()->size(); ++k) {
    EXPECT_NEAR(ga.argmax[k], 0.0, 1e-12);
    EXPECT_LE(rel(ga.max[k], 1.0 / (G()->eps(k) * std::sqrt(2 * kPi))), 1e-14);
  }
}

TEST(Taylor, Examples) {
  const GsfFamily sq = scalar([](double x) { return x * x; }, [](double x, int n) { return n == 0 ? x * x : n == 1 ? 2 * x : n == 2 ? 2.0 : 0.0; });
  EXPECT_NEAR(taylor_remainder(sq, C(0.0), C(0.3), 2).remainder.last(), 0.0, 1e-15);
  const GsfFamily s = scalar([](double x) { return std::sin(x); }, smooth_fixtures()[0].df);
  const TaylorRemainder r = taylor_remainder(s, C(0.0), E(), 1);
  for (std::size_t k = 0; k < G()->size(); ++k) {
    const double e = G()->eps(k);
    EXPECT_LE(std::fabs(r.remainder[k] + e * e * e / 6.0), e * e * e * e * e / 100.0 + 4.0 * DBL_EPSILON * e);
  }
  EXPECT_NEAR(r.valuation, 3.0, 1e-3);
  EXPECT_TRUE(r.order_consistent);
  EXPECT_EQ(taylor_remainder(s, C(0.4), C(0.4), 0).remainder.last(), 0.0);
}

TEST(Lipschitz, ProbePairs) {
  const GsfFamily f = scalar([](double x) { return std::sin(3 * x); });
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-2, 2);
  for (int i = 0; i < 50; ++i) {
    const double x = U(rng), y = U(rng);
    EXPECT_LE(std::fabs(f.value(19, x) - f.value(19, y)), 3.0 * std::fabs(x - y) + 1e-15);
  }
}
