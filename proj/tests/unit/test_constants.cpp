#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rwre/branching.hpp"
#include "rwre/constants.hpp"
#include "rwre/env_model.hpp"
#include "rwre/errors.hpp"
#include "rwre/perpetuity.hpp"
#include "support/oracles.hpp"

using namespace rwre;
using rwre::oracle::chain_Enu;
using rwre::oracle::log_choose;

TEST(Enu, MatchesTruncatedChainDeterministic) {
  // w = 2/3: the transition is the NB(z + 1, 2/3) pmf.
  const double w = 2.0 / 3.0;
  const double oracle = chain_Enu(200, [&](int z, int y) {
    return log_choose(z + y, y) + (z + 1) * std::log(w) + y * std::log1p(-w);
  });
  const TailEstimate e = estimate_Enu(EnvSpec::deterministic(0.5), 200000, RngStream(1, 0));
  EXPECT_GE(e.estimate, 1.0);
  EXPECT_EQ(e.quantity, "E_nu");
  EXPECT_NEAR(e.estimate, oracle, 3.0 * e.se);
}

TEST(Enu, MatchesTruncatedChainBeta) {
  // Integrating the NB pmf against the Beta(3, 1) density 3 w^2 gives
  // 3 C(z + y, y) B(z + 4, y + 1).
  auto log_beta = [](double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); };
  const double oracle = chain_Enu(400, [&](int z, int y) {
    return std::log(3.0) + log_choose(z + y, y) + log_beta(z + 4.0, y + 1.0);
  });
  const TailEstimate e = estimate_Enu(EnvSpec::beta(3.0, 1.0), 200000, RngStream(2, 0));
  EXPECT_NEAR(e.estimate, oracle, 3.0 * e.se);
}

TEST(Enu, StandardErrorScalesAsInverseRootReplicas) {
  const EnvSpec spec = EnvSpec::beta(3.0, 1.0);
  const double se1 = estimate_Enu(spec, 25000, RngStream(3, 0)).se;
  const double se2 = estimate_Enu(spec, 50000, RngStream(3, 1)).se;
  const double se4 = estimate_Enu(spec, 100000, RngStream(3, 2)).se;
  EXPECT_NEAR(se2 / se1, 1.0 / std::sqrt(2.0), 0.2 / std::sqrt(2.0));
  EXPECT_NEAR(se4 / se1, 0.5, 0.1);
}

TEST(C3Tail, PlateauOnTheFarGrid) {
  const EnvSpec spec = EnvSpec::beta(3.0, 1.0);
  const std::vector<double> grid{80.0, 160.0, 320.0, 640.0};
  const C3TailResult r = estimate_C3_tail(spec, 2.0, grid, 2000000, RngStream(4, 0));
  EXPECT_LT(r.flatness, 1.5);
  EXPECT_EQ(r.estimate.method, TailMethod::EmpiricalTailPlateau);
  EXPECT_EQ(r.estimate.grid, grid);
  ASSERT_EQ(r.curve.size(), grid.size());
  double mean = 0.0;
  for (const auto& c : r.curve) mean += c.value / grid.size();
  EXPECT_NEAR(r.estimate.estimate, mean, 1e-9 * mean);
  // Tail probabilities decrease along the grid.
  for (std::size_t g = 1; g < grid.size(); ++g) {
    EXPECT_LE(r.curve[g].value / (grid[g] * grid[g]), r.curve[g - 1].value / (grid[g - 1] * grid[g - 1]));
  }
}

TEST(C3Tail, NearGridDoesNotThrow) {
  const std::vector<double> grid{20.0, 35.6, 63.2, 112.5, 200.0};
  EXPECT_NO_THROW(estimate_C3_tail(EnvSpec::beta(3.0, 1.0), 2.0, grid, 1000000, RngStream(5, 0)));
}

TEST(C3Tail, GridUnstable) {
  const EnvSpec spec = EnvSpec::beta(3.0, 1.0);
  auto expect_unstable = [&](std::vector<double> grid, std::uint64_t reps) {
    try {
      estimate_C3_tail(spec, 2.0, grid, reps, RngStream(6, 0));
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::GridUnstable);
    }
  };
  expect_unstable({0.5, 50.0}, 100000);    // not flat
  expect_unstable({20.0, 1e6}, 10000);     // top point never reached
  expect_unstable({}, 10);
}

TEST(C3Conditional, RouteAgreesWithTail) {
  const EnvSpec spec = EnvSpec::beta(3.0, 1.0);
  TailEstimate c2;
  c2.estimate = *kesten_C2_closed_form(spec);
  const std::vector<double> t_grid{5, 10, 20, 40, 80, 160};
  ExecPolicy pol;
  pol.workers = 4;
  const C3ConditionalResult c = estimate_C3_conditional(spec, 2.0, c2, t_grid, 4000000, RngStream(7, 0), pol);
  for (const auto& p : c.curve) {
    if (p.hit_probability.hits > 0) EXPECT_GE(p.conditional_moment.value, p.t * p.t);
    EXPECT_NEAR(p.joint_moment.value, p.hit_probability.value * p.conditional_moment.value,
                1e-9 * (1.0 + p.joint_moment.value));
  }
  EXPECT_LE(c.stabilization, 0.1);
  EXPECT_EQ(c.estimate.method, TailMethod::ConditionalMoment);
  const std::vector<double> x_grid{80.0, 160.0, 320.0, 640.0};
  const C3TailResult t = estimate_C3_tail(spec, 2.0, x_grid, 4000000, RngStream(7, 1), pol);
  // Z_tau^alpha has infinite variance at tail index alpha, so its se is not a
  // usable yardstick; compare relatively instead.
  EXPECT_NEAR(c.estimate.estimate / t.estimate.estimate, 1.0, 0.25);
}

TEST(C3Conditional, NotStabilizedWithoutHalvedPoint) {
  TailEstimate c2;
  c2.estimate = 1.0;
  try {
    estimate_C3_conditional(EnvSpec::beta(3.0, 1.0), 2.0, c2, std::vector<double>{3.0, 7.0}, 1000, RngStream(8, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotStabilized);
  }
}

TEST(Compose, RatioAndPower) {
  TailEstimate c3{"C3", 6.0, 0.6, 100, TailMethod::EmpiricalTailPlateau, {}, {}};
  TailEstimate enu{"Enu", 1.5, 0.0, 100, TailMethod::Mean, {}, {}};
  const TailEstimate c1 = ratio_C1(c3, enu);
  EXPECT_DOUBLE_EQ(c1.estimate, 4.0);
  EXPECT_DOUBLE_EQ(c1.se, 0.4);
  // Linear in C3.
  TailEstimate c3x2 = c3;
  c3x2.estimate *= 2;
  c3x2.se *= 2;
  EXPECT_DOUBLE_EQ(ratio_C1(c3x2, enu).estimate, 2 * c1.estimate);
  EXPECT_DOUBLE_EQ(ratio_C1(c3x2, enu).se, 2 * c1.se);
  enu.se = 0.15;
  EXPECT_NEAR(ratio_C1(c3, enu).se, std::hypot(0.4, 6.0 * 0.15 / 2.25), 1e-12);

  const CumulantProfile ballistic = profile(EnvSpec::beta(3.0, 1.0));
  const ComposedConstants b = compose_constants(ballistic, c1);
  EXPECT_NEAR(b.C_alpha.estimate, std::pow(2.0 / 3.0, 2.0) * 4.0, 1e-12);
  EXPECT_EQ(b.C_alpha.quantity, "C_alpha");

  const CumulantProfile sub = profile(EnvSpec::beta(1.5, 0.8));
  EXPECT_DOUBLE_EQ(compose_constants(sub, c1).C_alpha.estimate, c1.estimate);

  CumulantProfile broken = ballistic;
  broken.speed_v = 0.0;
  try {
    compose_constants(broken, c1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RegimeMismatch);
  }
}

TEST(Hill, ParetoSample) {
  RngStream rng(9, 0);
  std::vector<double> s(200000);
  for (auto& v : s) v = std::pow(rng.uniform_open(), -0.5);
  const TailEstimate h = hill_diagnostic(s, 0.01);
  EXPECT_NEAR(h.estimate, 2.0, 3.0 * h.se);
  EXPECT_NEAR(h.se, h.estimate / std::sqrt(2000.0), 1e-12);
  EXPECT_EQ(h.method, TailMethod::Hill);
}

TEST(Hill, CycleSumsHaveIndexAlpha) {
  const auto sums = sample_cycle_sums(EnvSpec::beta(3.0, 1.0), 1000000, RngStream(10, 0));
  const TailEstimate h = hill_diagnostic(sums, 1e-4);
  EXPECT_NEAR(h.estimate, 2.0, 3.0 * h.se);
}

TEST(Hill, Errors) {
  std::vector<double> flat(5000, 3.0);
  EXPECT_THROW(hill_diagnostic(flat, 0.01), Error);
  std::vector<double> few(999, 1.0);
  try {
    hill_diagnostic(few, 0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewSamples);
  }
  std::vector<double> ok(5000);
  for (std::size_t i = 0; i < ok.size(); ++i) ok[i] = 1.0 + i;
  EXPECT_THROW(hill_diagnostic(ok, 0.2), Error);
  EXPECT_THROW(hill_diagnostic(ok, 0.0), Error);
  EXPECT_THROW(hill_diagnostic(ok, 1e-4), Error);  // k < 2
}

TEST(ConstantsCsv, Header) {
  std::ostringstream os;
  std::vector<TailEstimate> rows{{"C3", 7.0, 0.5, 10, TailMethod::EmpiricalTailPlateau, {20.0, 200.0}, {"a", "b"}}};
  write_constants_csv(os, rows);
  EXPECT_EQ(os.str(), "quantity,method,estimate,se,replicas,grid_lo,grid_hi,flags\n"
                      "C3,empirical-tail-plateau,7,0.5,10,20,200,a;b\n");
}
