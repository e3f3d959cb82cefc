#include <gtest/gtest.h>

#include <cmath>

#include "rwre/env_model.hpp"
#include "rwre/errors.hpp"
#include "rwre/stats.hpp"

using namespace rwre;

namespace {

EnvSpec beta31() { return EnvSpec::beta(3.0, 1.0); }
EnvSpec two_point() { return EnvSpec::two_point(2.0, 0.25, 0.5); }

// Composite Simpson on (0, 1) for E A^s under Beta(3, 1): the integrand is
// 3 (1 - w)^s w^(2 - s). Needs 0 <= s <= 2 so both endpoints stay finite.
double beta31_moment_simpson(double s) {
  const int n = 200000;
  const double h = 1.0 / n;
  auto f = [&](double w) { return 3.0 * std::pow(1.0 - w, s) * std::pow(w, 2.0 - s); };
  double acc = f(0.0) + f(1.0);
  for (int i = 1; i < n; ++i) acc += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Bisection on (2^s + 4^-s) / 2 = 1, written out independently of the library.
double two_point_alpha_oracle() {
  double lo = 0.1, hi = 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double g = 0.5 * (std::pow(2.0, mid) + std::pow(4.0, -mid)) - 1.0;
    (g < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(EnvSpec, RejectsInvalidParameters) {
  EXPECT_THROW(EnvSpec::beta(0.0, 1.0), Error);
  EXPECT_THROW(EnvSpec::two_point(-1.0, 0.5, 0.5), Error);
  EXPECT_THROW(EnvSpec::two_point(1.0, 0.5, 1.5), Error);
  EXPECT_THROW(EnvSpec::discrete({0.5, 2.0}, {0.5, 0.6}), Error);
  EXPECT_THROW(EnvSpec::discrete({0.5, 0.0}, {0.5, 0.5}), Error);
  EXPECT_THROW(EnvSpec::deterministic(0.0), Error);
  try {
    EnvSpec::two_point(2.0, 0.9, 0.5).require_transient();
    FAIL() << "expected NotTransient";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotTransient);
  }
}

TEST(Lambda, ClosedForms) {
  EXPECT_DOUBLE_EQ(lambda(two_point(), 1.0), 1.125);
  for (const auto& spec : {beta31(), two_point(), EnvSpec::deterministic(0.5),
                           EnvSpec::discrete({0.3, 1.7, 2.2}, {0.5, 0.3, 0.2})}) {
    EXPECT_NEAR(lambda(spec, 0.0), 1.0, 1e-14);
  }
  EXPECT_NEAR(lambda(beta31(), 1.0), 0.5, 1e-12);
  EXPECT_NEAR(beta31_moment_simpson(1.0), 0.5, 1e-10);
}

TEST(Lambda, BetaMatchesIndependentQuadrature) {
  for (double s : {0.25, 0.5, 1.0, 1.5, 2.0}) {
    EXPECT_NEAR(lambda(beta31(), s), beta31_moment_simpson(s), 1e-6) << "s = " << s;
  }
  for (double s : {-0.5, 0.25, 1.0, 2.0, 2.9}) {
    EXPECT_NEAR(lambda_quadrature(beta31(), s), lambda(beta31(), s), 1e-9 * lambda(beta31(), s)) << "s = " << s;
  }
  const EnvSpec b = EnvSpec::beta(1.5, 0.8);
  for (double s : {0.2, 0.7, 1.2}) EXPECT_NEAR(lambda_quadrature(b, s), lambda(b, s), 1e-8 * lambda(b, s));
}

TEST(Lambda, MomentDivergesAtAlphaInf) {
  try {
    lambda(beta31(), 3.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MomentDiverges);
  }
  EXPECT_THROW(lambda(beta31(), 3.5), Error);
  EXPECT_DOUBLE_EQ(beta31().alpha_inf(), 3.0);
  EXPECT_TRUE(std::isinf(two_point().alpha_inf()));
}

TEST(LogCumulant, DerivativeExamples) {
  // psi(3) - psi(1) = 1 + 1/2
  EXPECT_NEAR(lambda_prime(beta31(), 2.0), 1.5, 1e-12);
  const EnvSpec det = EnvSpec::deterministic(0.7);
  for (double s : {0.0, 0.5, 3.0}) {
    EXPECT_NEAR(log_cumulant(det, s), s * std::log(0.7), 1e-14);
    EXPECT_NEAR(lambda_prime(det, s), std::log(0.7), 1e-14);
  }
  EXPECT_NEAR(lambda_prime(two_point(), 0.0), -std::log(2.0) / 2.0, 1e-14);
  EXPECT_NEAR(mean_log_A(two_point()), -std::log(2.0) / 2.0, 1e-14);
}

TEST(SolveAlpha, Examples) {
  EXPECT_NEAR(solve_alpha(beta31()), 2.0, 1e-9);
  const double a = solve_alpha(two_point());
  EXPECT_GT(a, 0.69);
  EXPECT_LT(a, 0.70);
  EXPECT_NEAR(a, two_point_alpha_oracle(), 1e-9);
  EXPECT_NEAR(solve_alpha(EnvSpec::beta(1.5, 0.8)), 0.7, 1e-9);
  try {
    solve_alpha(EnvSpec::deterministic(0.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoPositiveRoot);
  }
  try {
    solve_alpha(EnvSpec::two_point(2.0, 0.9, 0.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotTransient);
  }
}

TEST(Legendre, Examples) {
  const EnvSpec b = beta31();
  EXPECT_NEAR(legendre(b, mean_log_A(b)), 0.0, 1e-12);
  const CumulantProfile p = profile(b);
  EXPECT_NEAR(legendre(b, p.rho0), p.alpha * p.rho0, 1e-8);
  EXPECT_NEAR(legendre(b, 1.5), 3.0, 1e-8);
  const CumulantProfile tp = profile(two_point());
  EXPECT_NEAR(legendre(two_point(), tp.rho0), tp.alpha * tp.rho0, 1e-8);
}

TEST(Legendre, OutOfDomain) {
  auto expect_domain = [](const EnvSpec& s, double rho) {
    try {
      legendre(s, rho);
      FAIL() << "rho = " << rho;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::OutOfDomain);
    }
  };
  expect_domain(beta31(), -1.6);
  expect_domain(two_point(), -0.5);
  expect_domain(two_point(), std::log(2.0));
  expect_domain(two_point(), 1.0);
}

TEST(Profile, Examples) {
  const CumulantProfile b = profile(beta31());
  EXPECT_NEAR(b.alpha, 2.0, 1e-9);
  EXPECT_NEAR(b.mean_A, 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(b.speed_v, (1.0 - b.mean_A) / (1.0 + b.mean_A));
  EXPECT_NEAR(b.speed_v, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(b.regime, Regime::Ballistic);
  EXPECT_FALSE(b.arithmetic_flag);
  EXPECT_NEAR(b.rho0, 1.5, 1e-8);
  EXPECT_DOUBLE_EQ(b.alpha_inf, 3.0);
  EXPECT_TRUE(std::isinf(b.rho_inf));

  const CumulantProfile t = profile(two_point());
  EXPECT_DOUBLE_EQ(t.mean_A, 1.125);
  EXPECT_EQ(t.speed_v, 0.0);
  EXPECT_EQ(t.regime, Regime::SubBallistic);
  EXPECT_TRUE(t.arithmetic_flag);
  EXPECT_NEAR(t.rho_inf, std::log(2.0), 1e-15);

  const CumulantProfile u = profile(EnvSpec::two_point(0.5, 4.0 / 3.0, 0.5));
  EXPECT_NEAR(u.mean_A, 11.0 / 12.0, 1e-15);
  EXPECT_NEAR(u.speed_v, 1.0 / 23.0, 1e-15);
  EXPECT_EQ(u.regime, Regime::Ballistic);
  EXPECT_FALSE(u.arithmetic_flag);
}

TEST(Profile, ArithmeticFlag) {
  EXPECT_TRUE(is_arithmetic(EnvSpec::discrete({2.0, 8.0, 0.5}, {0.2, 0.3, 0.5})));
  EXPECT_FALSE(is_arithmetic(EnvSpec::discrete({2.0, 3.0}, {0.5, 0.5})));
  EXPECT_FALSE(is_arithmetic(beta31()));
}

TEST(Profile, InvariantsHoldOnSeveralSpecs) {
  for (const auto& spec : {beta31(), two_point(), EnvSpec::beta(1.5, 0.8), EnvSpec::beta(4.0, 1.5),
                           EnvSpec::discrete({0.3, 1.7, 2.2}, {0.5, 0.3, 0.2})}) {
    const CumulantProfile p = profile(spec);
    EXPECT_GT(p.alpha, 0.0);
    EXPECT_NEAR(lambda(spec, p.alpha), 1.0, 1e-9);
    EXPECT_GT(p.rho0, 0.0);
    EXPECT_NEAR(legendre(spec, p.rho0), p.alpha * p.rho0, 1e-8);
    if (p.mean_A < 1.0) {
      EXPECT_NEAR(p.speed_v, (1.0 - p.mean_A) / (1.0 + p.mean_A), 1e-15);
    } else {
      EXPECT_EQ(p.speed_v, 0.0);
    }
  }
}

TEST(DeviationWindow, Examples) {
  const CumulantProfile p = profile(beta31());
  const DeviationWindow w = deviation_window(p, std::exp(15.0), 0.1);
  EXPECT_EQ(w.n0, 10);
  EXPECT_EQ(w.m, 5);
  EXPECT_EQ(w.n1, 5);
  EXPECT_EQ(w.n2, 15);
  EXPECT_FALSE(w.clamped);

  // x = e^rho0 gives n0 = 1; m = 1 forces the clamp.
  const DeviationWindow c = window_bounds(p.rho0, std::exp(p.rho0), 0.1);
  EXPECT_EQ(c.n0, 1);
  EXPECT_TRUE(c.clamped);
  EXPECT_EQ(c.n1, 1);
  try {
    deviation_window(p, std::exp(p.rho0), 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::WindowDegenerate);
  }
  EXPECT_THROW(deviation_window(p, 2.0, 0.1), Error);  // x <= e
  EXPECT_THROW(deviation_window(p, 100.0, 0.5), Error);
}

TEST(SampleA, Examples) {
  RngStream r(1, 0);
  const auto det = sample_A(EnvSpec::deterministic(0.5), r, 3);
  EXPECT_EQ(det, (std::vector<double>{0.5, 0.5, 0.5}));

  RngStream s(2, 0);
  const auto draws = sample_A(beta31(), s, 1000000);
  MeanAccumulator acc;
  for (double a : draws) acc.add(a);
  EXPECT_NEAR(acc.mean(), 0.5, 3.0 * acc.se());

  RngStream x(5, 9), y(5, 9);
  EXPECT_EQ(sample_A(beta31(), x, 100), sample_A(beta31(), y, 100));
}

TEST(SampleA, OmegaIsConsistentWithA) {
  RngStream r(3, 1);
  MeanAccumulator acc;
  for (int i = 0; i < 200000; ++i) {
    const double w = draw_omega(beta31(), r);
    ASSERT_GT(w, 0.0);
    ASSERT_LT(w, 1.0);
    acc.add(w);
  }
  EXPECT_NEAR(acc.mean(), mean_omega(beta31()), 3.0 * acc.se());
  EXPECT_NEAR(mean_omega(beta31()), 0.75, 1e-12);
}

// ---- properties

TEST(LambdaProperty, HolderConvexity) {
  for (const auto& spec : {beta31(), two_point(), EnvSpec::beta(1.5, 0.8)}) {
    const double top = std::min(spec.alpha_inf(), 4.0) - 0.05;
    for (double s1 = 0.0; s1 < top; s1 += 0.37) {
      for (double s2 = s1 + 0.1; s2 < top; s2 += 0.41) {
        for (double t : {0.1, 0.5, 0.9}) {
          const double lhs = lambda(spec, t * s1 + (1 - t) * s2);
          const double rhs = std::pow(lambda(spec, s1), t) * std::pow(lambda(spec, s2), 1 - t);
          EXPECT_LE(lhs, rhs * (1.0 + 1e-9));
        }
      }
    }
  }
}

TEST(LambdaProperty, DerivativeMonotoneAndMatchesFiniteDifference) {
  for (const auto& spec : {beta31(), two_point(), EnvSpec::discrete({0.3, 1.7, 2.2}, {0.5, 0.3, 0.2})}) {
    const double top = std::min(spec.alpha_inf(), 4.0) - 0.05;
    double prev = -1e300;
    for (int i = 0; i < 100; ++i) {
      const double s = top * i / 100.0;
      const double d = lambda_prime(spec, s);
      EXPECT_GE(d, prev - 1e-12);
      prev = d;
      const double h = 1e-6 * std::max(1.0, std::abs(s));
      const double fd = (log_cumulant(spec, s + h) - log_cumulant(spec, s - h)) / (2 * h);
      EXPECT_NEAR(d, fd, 1e-5) << "s = " << s;
      EXPECT_NEAR(lambda_prime_numeric(spec, s), d, 1e-5);
    }
  }
}

TEST(LambdaProperty, LegendreDuality) {
  for (const auto& spec : {beta31(), two_point()}) {
    const double top = std::min(spec.alpha_inf(), 4.0) - 0.1;
    for (double s = 0.05; s < top; s += 0.15) {
      const double rho = lambda_prime(spec, s);
      if (rho >= rho_inf(spec)) continue;
      EXPECT_NEAR(legendre(spec, rho), s * rho - log_cumulant(spec, s), 1e-8) << "s = " << s;
    }
  }
}

TEST(LambdaProperty, AlphaStableUnderProbabilityPerturbation) {
  const std::vector<double> atoms{0.3, 1.7, 2.2};
  const double a0 = solve_alpha(EnvSpec::discrete(atoms, {0.5, 0.3, 0.2}));
  const double a1 = solve_alpha(EnvSpec::discrete(atoms, {0.5 + 1e-9, 0.3 - 1e-9, 0.2}));
  EXPECT_LT(std::abs(a1 - a0), 1e-6);
}

TEST(TiltedSampler, DiscreteFrequenciesMatchTilt) {
  const EnvSpec spec = EnvSpec::discrete({0.3, 1.7, 2.2}, {0.5, 0.3, 0.2});
  const double alpha = solve_alpha(spec);
  const TiltedSampler sampler(spec, alpha);
  RngStream r(11, 0);
  const int N = 400000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < N; ++i) {
    const double a = sampler.draw(r);
    for (int k = 0; k < 3; ++k) counts[k] += a == spec.atoms()[k];
  }
  for (int k = 0; k < 3; ++k) {
    const double expect = std::pow(spec.atoms()[k], alpha) * spec.probs()[k];
    const double se = std::sqrt(expect * (1 - expect) / N);
    EXPECT_NEAR(counts[k] / double(N), expect, 3 * se) << "atom " << k;
  }
}

TEST(TiltedSampler, BetaTiltShiftsLogMean) {
  // Under dP_s proportional to A^s dP, E log A = Lambda'(s).
  const TiltedSampler sampler(beta31(), 2.0);
  RngStream r(12, 0);
  MeanAccumulator acc;
  for (int i = 0; i < 400000; ++i) acc.add(std::log(sampler.draw(r)));
  EXPECT_NEAR(acc.mean(), 1.5, 3 * acc.se());
  try {
    TiltedSampler bad(beta31(), 3.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TiltUnavailable);
  }
}
