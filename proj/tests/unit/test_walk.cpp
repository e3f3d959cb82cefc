#include <gtest/gtest.h>

#include <cmath>

#include "rwre/env_model.hpp"
#include "rwre/errors.hpp"
#include "rwre/stats.hpp"
#include "rwre/walk.hpp"

using namespace rwre;

TEST(QuenchedEnv, SitesDoNotDependOnDiscoveryOrder) {
  const RngStream base(4, 2);
  QuenchedEnv a(EnvSpec::beta(3.0, 1.0), base);
  QuenchedEnv b(EnvSpec::beta(3.0, 1.0), base);
  const double a_far = a.omega(50);
  const double a_left = a.omega(-20);
  for (std::int64_t i = -20; i <= 50; ++i) b.omega(i);
  EXPECT_EQ(a_far, b.omega(50));
  EXPECT_EQ(a_left, b.omega(-20));
  EXPECT_EQ(a.omega(7), b.omega(7));
  EXPECT_EQ(a.lo(), -20);
  EXPECT_EQ(a.hi(), 50);
  const double first = a.omega(3);
  a.omega(500);
  EXPECT_EQ(a.omega(3), first);
}

TEST(RunUntilHit, PathwiseIdentityAndCounters) {
  QuenchedEnv env(EnvSpec::beta(3.0, 1.0), RngStream(1, 0));
  RngStream base(1, 1);
  for (std::uint64_t r = 0; r < 500; ++r) {
    env.reset(RngStream(1, 100 + r));
    RngStream rng = base.split(r);
    const HitRecord h = run_until_hit(env, 40, rng);
    EXPECT_EQ(h.n, 40);
    EXPECT_EQ(h.T, 40 + 2 * h.sum_U());
    EXPECT_EQ(h.sum_U(), h.steps_left_total);
    EXPECT_EQ(h.T % 2, 0);
    std::int64_t prev = std::numeric_limits<std::int64_t>::min();
    for (const auto& [site, count] : h.U) {
      EXPECT_GT(site, prev);
      EXPECT_LT(site, 40);
      EXPECT_GE(site, h.min_site);
      EXPECT_GT(count, 0);
      prev = site;
    }
  }
}

TEST(RunUntilHit, DeterministicEnvironmentMeanHittingTime) {
  // A = 1/2 gives w = 2/3, speed 1/3 and E T_n = 3 n.
  QuenchedEnv env(EnvSpec::deterministic(0.5), RngStream(2, 0));
  RngStream base(2, 1);
  MeanAccumulator acc;
  for (std::uint64_t r = 0; r < 20000; ++r) {
    RngStream rng = base.split(r);
    acc.add(static_cast<double>(run_until_hit(env, 100, rng).T));
  }
  EXPECT_NEAR(acc.mean(), 300.0, 3.0 * acc.se());
}

TEST(RunUntilHit, NoLeftStepsWhenAIsTiny) {
  QuenchedEnv env(EnvSpec::deterministic(1e-15), RngStream(3, 0));
  RngStream rng(3, 1);
  const HitRecord h = run_until_hit(env, 1000, rng);
  EXPECT_EQ(h.T, 1000);
  EXPECT_TRUE(h.U.empty());
  EXPECT_EQ(h.min_site, 0);
}

TEST(RunUntilHit, HorizonExceeded) {
  QuenchedEnv env(EnvSpec::deterministic(0.5), RngStream(4, 0));
  RngStream rng(4, 1);
  try {
    run_until_hit(env, 1000, rng, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::HorizonExceeded);
  }
}

TEST(RunUntilHit, ReplaysFromSameStreams) {
  QuenchedEnv e1(EnvSpec::beta(3.0, 1.0), RngStream(9, 0));
  QuenchedEnv e2(EnvSpec::beta(3.0, 1.0), RngStream(9, 0));
  RngStream r1(9, 1), r2(9, 1);
  const HitRecord a = run_until_hit(e1, 60, r1);
  const HitRecord b = run_until_hit(e2, 60, r2);
  EXPECT_EQ(a.T, b.T);
  EXPECT_EQ(a.U, b.U);
}

TEST(PositionAfter, ParityAndZeroSteps) {
  QuenchedEnv env(EnvSpec::beta(3.0, 1.0), RngStream(5, 0));
  RngStream base(5, 1);
  {
    RngStream rng = base.split(0);
    EXPECT_EQ(position_after(env, 0, rng), 0);
  }
  for (std::int64_t steps : {1, 2, 17, 100, 1001}) {
    RngStream rng = base.split(static_cast<std::uint64_t>(steps));
    const auto x = position_after(env, steps, rng);
    EXPECT_EQ(((x % 2) + 2) % 2, steps % 2);
    EXPECT_LE(std::abs(x), steps);
  }
}

TEST(PositionAfter, DeterministicEnvironmentSpeed) {
  QuenchedEnv env(EnvSpec::deterministic(0.5), RngStream(6, 0));
  RngStream base(6, 1);
  MeanAccumulator acc;
  for (std::uint64_t r = 0; r < 20000; ++r) {
    RngStream rng = base.split(r);
    acc.add(static_cast<double>(position_after(env, 300, rng)));
  }
  EXPECT_NEAR(acc.mean(), 100.0, 3.0 * acc.se());
}

TEST(LongestExcursion, GamblersRuin) {
  // With w = 2/3 the chance of ever stepping below j after T_j is A = 1/2,
  // and P(L >= k) = 2^-k.
  QuenchedEnv env(EnvSpec::deterministic(0.5), RngStream(7, 0));
  RngStream base(7, 1);
  const std::uint64_t N = 40000;
  std::vector<std::uint64_t> tail(8, 0);
  for (std::uint64_t r = 0; r < N; ++r) {
    RngStream rng = base.split(r);
    const ExcursionStat e = longest_excursion(env, 5, 2000, rng);
    EXPECT_EQ(e.j, 5);
    EXPECT_EQ(e.horizon, 2000);
    for (std::int64_t k = 1; k < 8; ++k) tail[k] += e.L >= k;
  }
  const double p1 = tail[1] / double(N);
  EXPECT_NEAR(p1, 0.5, 3.0 * std::sqrt(0.25 / N));
  std::vector<double> ks, logs;
  for (int k = 1; k < 8; ++k) {
    ks.push_back(k);
    logs.push_back(std::log(tail[k] / double(N)));
  }
  EXPECT_LE(ols(ks, logs).slope, std::log(0.5) + 0.1);
}

TEST(LongestExcursion, RandomEnvironmentTailDecays) {
  QuenchedEnv env(EnvSpec::beta(3.0, 1.0), RngStream(8, 0));
  RngStream base(8, 1);
  const std::uint64_t N = 20000;
  std::vector<std::uint64_t> tail(10, 0);
  for (std::uint64_t r = 0; r < N; ++r) {
    env.reset(base.split(2 * r));
    RngStream rng = base.split(2 * r + 1);
    const ExcursionStat e = longest_excursion(env, 10, 500, rng);
    for (std::int64_t k = 1; k < 10; ++k) tail[k] += e.L >= k;
  }
  std::vector<double> ks, logs;
  for (int k = 1; k < 10; ++k) {
    if (tail[k] < 20) break;
    ks.push_back(k);
    logs.push_back(std::log(tail[k] / double(N)));
  }
  ASSERT_GE(ks.size(), 3u);
  // Annealed decay rate is at least -log E A = log 2 per level.
  EXPECT_LE(ols(ks, logs).slope, std::log(lambda(EnvSpec::beta(3.0, 1.0), 1.0)) + 0.1);
}
