#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rwre {

/// Streaming mean/variance (Welford) with an order-sensitive merge.
/// Merging the same partials in the same order is bit-reproducible.
class MeanAccumulator {
 public:
  void add(double x) noexcept;
  void merge(const MeanAccumulator& other) noexcept;

  std::uint64_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept;  // unbiased sample variance
  double se() const noexcept;        // standard error of the mean

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for a binomial proportion at normal quantile z.
Interval wilson_interval(std::uint64_t hits, std::uint64_t trials, double z = 1.959963984540054);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
/// Ties are handled by stepping both ECDFs past equal values together.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Asymptotic two-sample KS critical value at significance level `level`.
double ks_critical_value(double level, std::size_t n, std::size_t m);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

/// Ordinary least squares of y on x.
LinearFit ols(std::span<const double> x, std::span<const double> y);

double correlation(std::span<const double> x, std::span<const double> y);

/// Upper quantile of the chi-square distribution: P(X > q) = level.
double chi_square_critical(double level, double dof);

}  // namespace rwre

namespace rwre {

/// Monte Carlo point estimate with its standard error.
struct McEstimate {
  double value = 0.0;
  double se = 0.0;
  std::uint64_t replicas = 0;
  std::uint64_t hits = 0;  // replicas contributing a nonzero score
  Interval ci;             // 95% interval
};

/// Indicator mean with a Wilson interval; se is the interval half-width over
/// 1.96 so that zero-hit estimates still carry an honest nonzero error.
McEstimate indicator_estimate(std::uint64_t hits, std::uint64_t trials);

/// Weighted-score mean with a normal 95% interval.
McEstimate score_estimate(const MeanAccumulator& acc, std::uint64_t hits);

}  // namespace rwre
