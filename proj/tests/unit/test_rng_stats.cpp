#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "rwre/parallel.hpp"
#include "rwre/rng.hpp"
#include "rwre/stats.hpp"

using namespace rwre;

TEST(RngStream, ReplayIsBitIdentical) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(RngStream, DistinctStreamsDiffer) {
  RngStream a(42, 7), b(42, 8), c(43, 7);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a();
    same_ab += x == b();
    same_ac += x == c();
  }
  EXPECT_EQ(same_ab, 0);
  EXPECT_EQ(same_ac, 0);
}

TEST(RngStream, SplitIsDeterministicAndDistinct) {
  const RngStream parent(1, 2);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t k = 0; k < 256; ++k) {
    RngStream c1 = parent.split(k), c2 = parent.split(k);
    const auto v = c1();
    EXPECT_EQ(v, c2());
    firsts.insert(v);
  }
  EXPECT_EQ(firsts.size(), 256u);
}

TEST(RngStream, UniformRanges) {
  RngStream r(3, 0);
  MeanAccumulator acc;
  for (int i = 0; i < 200000; ++i) {
    const double u = r.uniform();
    const double v = r.uniform_open();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_GT(v, 0.0);
    ASSERT_LT(v, 1.0);
    acc.add(u);
  }
  EXPECT_NEAR(acc.mean(), 0.5, 3.0 * acc.se());
}

TEST(MeanAccumulator, MergeMatchesSequential) {
  MeanAccumulator all, left, right;
  for (int i = 0; i < 100; ++i) {
    const double x = std::sin(i) * 10.0 + i * 0.1;
    all.add(x);
    (i < 37 ? left : right).add(x);
  }
  left.merge(right);
  EXPECT_EQ(left.count(), all.count());
  EXPECT_NEAR(left.mean(), all.mean(), 1e-12);
  EXPECT_NEAR(left.variance(), all.variance(), 1e-10);
}

TEST(Stats, WilsonInterval) {
  const Interval w = wilson_interval(30, 100);
  EXPECT_LT(w.lo, 0.3);
  EXPECT_GT(w.hi, 0.3);
  const Interval z = wilson_interval(0, 1000);
  EXPECT_EQ(z.lo, 0.0);
  EXPECT_GT(z.hi, 0.0);
  const McEstimate e = indicator_estimate(0, 1000);
  EXPECT_GT(e.se, 0.0);
}

TEST(Stats, KolmogorovSmirnov) {
  std::vector<double> a{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(ks_statistic(a, a), 0.0);
  EXPECT_DOUBLE_EQ(ks_statistic({1, 2, 3}, {4, 5, 6}), 1.0);
  // Ties across samples: the ECDFs are compared after each distinct value.
  EXPECT_DOUBLE_EQ(ks_statistic({1, 1, 2, 2}, {1, 2, 2, 2}), 0.25);
  // c(0.001) = sqrt(-ln(0.0005) / 2) = 1.9495...
  EXPECT_NEAR(ks_critical_value(0.001, 100, 100), 1.94947 * std::sqrt(0.02), 1e-4);
}

TEST(Stats, OlsAndCorrelation) {
  std::vector<double> x{1, 2, 3, 4, 5}, y;
  for (double v : x) y.push_back(2.5 * v - 1.0);
  const LinearFit f = ols(x, y);
  EXPECT_NEAR(f.slope, 2.5, 1e-12);
  EXPECT_NEAR(f.intercept, -1.0, 1e-12);
  EXPECT_NEAR(f.slope_se, 0.0, 1e-12);
  EXPECT_NEAR(correlation(x, y), 1.0, 1e-12);
}

TEST(Stats, ChiSquareCritical) { EXPECT_NEAR(chi_square_critical(0.001, 10), 29.5883, 1e-3); }

TEST(Parallel, ChunkResultsIndependentOfWorkers) {
  auto run = [](unsigned workers) {
    return map_replicas<double>(5000, {workers}, [](std::uint64_t i) {
      RngStream r = RngStream(9, 0).split(i);
      return r.uniform();
    });
  };
  const auto one = run(1);
  EXPECT_EQ(one, run(4));
  EXPECT_EQ(one, run(8));
}

TEST(Parallel, ExceptionsPropagate) {
  EXPECT_THROW(map_replicas<int>(3000, {3},
                                 [](std::uint64_t i) -> int {
                                   if (i == 2500) throw std::runtime_error("boom");
                                   return 0;
                                 }),
               std::runtime_error);
}
