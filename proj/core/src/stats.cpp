#include "rwre/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace rwre {

void MeanAccumulator::add(double x) noexcept {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

void MeanAccumulator::merge(const MeanAccumulator& other) noexcept {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double n = na + nb;
  const double delta = other.mean_ - mean_;
  mean_ += delta * nb / n;
  m2_ += other.m2_ + delta * delta * na * nb / n;
  n_ += other.n_;
}

double MeanAccumulator::variance() const noexcept {
  return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
}

double MeanAccumulator::se() const noexcept {
  return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

Interval wilson_interval(std::uint64_t hits, std::uint64_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {hits == 0 ? 0.0 : std::max(0.0, centre - half), hits == trials ? 1.0 : std::min(1.0, centre + half)};
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical_value(double level, std::size_t n, std::size_t m) {
  const double c = std::sqrt(-0.5 * std::log(level / 2.0));
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  return c * std::sqrt((nn + mm) / (nn * mm));
}

LinearFit ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  }
  return fit;
}

double correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("correlation: need >= 2 paired points");
  MeanAccumulator ax, ay;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ax.add(x[i]);
    ay.add(y[i]);
  }
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - ax.mean()) * (y[i] - ay.mean());
  sxy /= static_cast<double>(x.size() - 1);
  const double denom = std::sqrt(ax.variance() * ay.variance());
  return denom > 0.0 ? sxy / denom : 0.0;
}

double chi_square_critical(double level, double dof) {
  boost::math::chi_squared dist(dof);
  return boost::math::quantile(boost::math::complement(dist, level));
}

}  // namespace rwre

namespace rwre {

McEstimate indicator_estimate(std::uint64_t hits, std::uint64_t trials) {
  McEstimate e;
  e.replicas = trials;
  e.hits = hits;
  e.value = trials > 0 ? static_cast<double>(hits) / static_cast<double>(trials) : 0.0;
  e.ci = wilson_interval(hits, trials);
  e.se = (e.ci.hi - e.ci.lo) / (2.0 * 1.959963984540054);
  return e;
}

McEstimate score_estimate(const MeanAccumulator& acc, std::uint64_t hits) {
  McEstimate e;
  e.replicas = acc.count();
  e.hits = hits;
  e.value = acc.mean();
  e.se = acc.se();
  e.ci = {e.value - 1.959963984540054 * e.se, e.value + 1.959963984540054 * e.se};
  return e;
}

}  // namespace rwre
