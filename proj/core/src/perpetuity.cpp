#include "rwre/perpetuity.hpp"

#include <array>
#include <cmath>
#include <ostream>

#include "rwre/branching.hpp"
#include "rwre/errors.hpp"

namespace rwre {

PerpetuityPath run_perpetuity(const EnvSpec& spec, std::int64_t n, RngStream& rng) {
  if (n < 1) throw Error(ErrorKind::OutOfDomain, "run_perpetuity needs n >= 1");
  const auto size = static_cast<std::size_t>(n + 1);
  PerpetuityPath path;
  path.horizon = n;
  path.A.resize(size);
  path.Y.resize(size);
  path.Ytilde.resize(size);
  path.Pi.resize(size);
  for (std::size_t k = 0; k < size; ++k) {
    const double a = draw_A(spec, rng);
    path.A[k] = a;
    path.Y[k] = k == 0 ? a : a * (path.Y[k - 1] + 1.0);
    path.Pi[k] = k == 0 ? a : path.Pi[k - 1] * a;
    path.Ytilde[k] = k == 0 ? a : path.Ytilde[k - 1] + path.Pi[k];
  }
  return path;
}

std::int64_t truncation_order(const EnvSpec& spec, double tol) {
  if (!(tol > 0.0 && tol < 1.0)) throw Error(ErrorKind::OutOfDomain, "truncation tolerance must lie in (0, 1)");
  if (!(mean_log_A(spec) < 0.0)) throw Error(ErrorKind::NotTransient, "perpetuity diverges: E log A >= 0");
  double theta = 1.0;
  if (prob_A_greater_one(spec) > 0.0) theta = std::min(1.0, 0.9 * solve_alpha(spec));
  const double contraction = lambda(spec, theta);
  return static_cast<std::int64_t>(std::floor(std::log(tol) / std::log(contraction))) + 1;
}

double sample_Y_truncated(const EnvSpec& spec, std::int64_t N, RngStream& rng) {
  double pi = 1.0;
  double sum = 0.0;
  for (std::int64_t j = 0; j <= N; ++j) {
    pi *= draw_A(spec, rng);
    sum += pi;
  }
  return sum;
}

YInfApprox approx_Y_inf(const EnvSpec& spec, double tol, RngStream& rng) {
  YInfApprox out;
  out.terms = truncation_order(spec, tol);
  out.value = sample_Y_truncated(spec, out.terms, rng);
  return out;
}

double kesten_C2_denominator(const EnvSpec& spec) {
  const double alpha = solve_alpha(spec);
  return alpha * lambda_prime(spec, alpha);
}

std::optional<double> kesten_C2_closed_form(const EnvSpec& spec) {
  const double alpha = solve_alpha(spec);
  const double denom = alpha * lambda_prime(spec, alpha);
  if (std::abs(alpha - 1.0) < 1e-9) return 1.0 / denom;
  if (std::abs(alpha - 2.0) < 1e-9) {
    const double rho = lambda(spec, 1.0);
    return (2.0 * rho / (1.0 - rho) + 1.0) / denom;
  }
  return std::nullopt;
}

McEstimate kesten_C2(const EnvSpec& spec, std::uint64_t replicas, const RngStream& stream, double tol,
                     ExecPolicy policy) {
  const double alpha = solve_alpha(spec);
  const double denom = alpha * lambda_prime(spec, alpha);
  const std::int64_t N = truncation_order(spec, tol);
  auto chunks = map_chunks(replicas, policy, [&](std::uint64_t begin, std::uint64_t end) {
    MeanAccumulator acc;
    for (std::uint64_t i = begin; i < end; ++i) {
      RngStream rng = stream.split(i);
      const double y = sample_Y_truncated(spec, N, rng);
      acc.add(std::pow(y + 1.0, alpha) - std::pow(y, alpha));
    }
    return acc;
  });
  MeanAccumulator total;
  for (const auto& c : chunks) total.merge(c);
  McEstimate e = score_estimate(total, total.count());
  // The denominator is exact, so the delta method reduces to scaling.
  e.value /= denom;
  e.se /= denom;
  e.ci = {e.ci.lo / denom, e.ci.hi / denom};
  return e;
}

std::vector<McEstimate> perpetuity_tail_profile(const EnvSpec& spec, std::span<const double> x_grid,
                                                std::uint64_t replicas, const RngStream& stream, double tol,
                                                ExecPolicy policy) {
  const double alpha = solve_alpha(spec);
  const std::int64_t N = truncation_order(spec, tol);
  const std::size_t G = x_grid.size();
  auto chunks = map_chunks(replicas, policy, [&](std::uint64_t begin, std::uint64_t end) {
    std::vector<std::uint64_t> hits(G, 0);
    for (std::uint64_t i = begin; i < end; ++i) {
      RngStream rng = stream.split(i);
      const double y = sample_Y_truncated(spec, N, rng);
      for (std::size_t g = 0; g < G; ++g) hits[g] += y > x_grid[g] ? 1 : 0;
    }
    return hits;
  });
  std::vector<std::uint64_t> hits(G, 0);
  for (const auto& c : chunks) {
    for (std::size_t g = 0; g < G; ++g) hits[g] += c[g];
  }
  std::vector<McEstimate> out;
  for (std::size_t g = 0; g < G; ++g) {
    McEstimate e = indicator_estimate(hits[g], replicas);
    const double scale = std::pow(x_grid[g], alpha);
    e.value *= scale;
    e.se *= scale;
    e.ci = {e.ci.lo * scale, e.ci.hi * scale};
    out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tilting

TiltedStream::TiltedStream(const EnvSpec& spec, double s) : sampler_(spec, s) {}

double TiltedStream::next(RngStream& rng) {
  const double a = sampler_.draw(rng);
  log_weight_ += sampler_.log_norm() - sampler_.exponent() * std::log(a);
  return a;
}

double TiltedStream::weight() const { return std::exp(log_weight_); }

McEstimate tilted_product_tail(const EnvSpec& spec, std::int64_t n, double x, std::uint64_t replicas,
                               const RngStream& stream, std::optional<double> tilt, ExecPolicy policy) {
  if (n < 1) throw Error(ErrorKind::OutOfDomain, "tilted_product_tail needs n >= 1");
  if (!(x > 0.0)) throw Error(ErrorKind::OutOfDomain, "tilted_product_tail needs x > 0");
  const double s = tilt ? *tilt : solve_alpha(spec);
  const double log_x = std::log(x);
  TiltedStream prototype(spec, s);
  auto chunks = map_chunks(replicas, policy, [&](std::uint64_t begin, std::uint64_t end) {
    std::pair<MeanAccumulator, std::uint64_t> out{};
    TiltedStream tilted = prototype;
    for (std::uint64_t i = begin; i < end; ++i) {
      RngStream rng = stream.split(i);
      tilted.reset();
      double log_pi = 0.0;
      for (std::int64_t k = 0; k < n; ++k) log_pi += std::log(tilted.next(rng));
      const bool hit = log_pi > log_x;
      out.first.add(hit ? tilted.weight() : 0.0);
      out.second += hit ? 1 : 0;
    }
    return out;
  });
  MeanAccumulator total;
  std::uint64_t hits = 0;
  for (const auto& [acc, h] : chunks) {
    total.merge(acc);
    hits += h;
  }
  return score_estimate(total, hits);
}

McEstimate plain_product_tail(const EnvSpec& spec, std::int64_t n, double x, std::uint64_t replicas,
                              const RngStream& stream, ExecPolicy policy) {
  if (n < 1) throw Error(ErrorKind::OutOfDomain, "plain_product_tail needs n >= 1");
  const double log_x = std::log(x);
  auto chunks = map_chunks(replicas, policy, [&](std::uint64_t begin, std::uint64_t end) {
    std::uint64_t hits = 0;
    for (std::uint64_t i = begin; i < end; ++i) {
      RngStream rng = stream.split(i);
      double log_pi = 0.0;
      for (std::int64_t k = 0; k < n; ++k) log_pi += std::log(draw_A(spec, rng));
      hits += log_pi > log_x ? 1 : 0;
    }
    return hits;
  });
  std::uint64_t hits = 0;
  for (const auto h : chunks) hits += h;
  return indicator_estimate(hits, replicas);
}

// ---------------------------------------------------------------------------
// Window negligibility

const TailRow& NegligibilityReport::row(const std::string& quantity) const {
  for (const auto& r : rows) {
    if (r.quantity == quantity) return r;
  }
  throw Error(ErrorKind::OutOfDomain, "no tail row named " + quantity);
}

namespace {

enum Quantity : std::size_t { kYEarly, kYLate, kZEarly, kZLate, kYFull, kYWindow, kQuantityCount };

constexpr const char* kQuantityNames[kQuantityCount] = {"Yt_n1",          "Yt_inf_minus_Yt_n2", "Zt_n1",
                                                        "Zt1_n2_inf",     "Yt_inf",             "Yt_window"};

}  // namespace

NegligibilityReport window_negligibility(const EnvSpec& spec, double x, double delta, const RngStream& stream,
                                         NegligibilityOptions options) {
  const CumulantProfile prof = profile(spec);
  const DeviationWindow window = deviation_window(prof, x, delta);
  return window_negligibility(spec, x, window, prof.alpha, stream, options);
}

NegligibilityReport window_negligibility(const EnvSpec& spec, double x, const DeviationWindow& window, double alpha,
                                         const RngStream& stream, NegligibilityOptions options) {
  if (window.n1 < 1 || window.n2 < window.n1) throw Error(ErrorKind::WindowDegenerate, "window needs 1 <= n1 <= n2");
  NegligibilityReport report;
  report.window = window;
  report.alpha = alpha;
  report.tilt = options.tilt.value_or(alpha);
  if (options.threshold) {
    report.threshold = *options.threshold;
  } else if (auto closed = kesten_C2_closed_form(spec)) {
    report.threshold = 0.2 * *closed;
  } else {
    report.threshold = 0.2 * kesten_C2(spec, options.replicas, stream.split(0xC2), options.tol, options.policy).value;
  }

  const std::int64_t n1 = window.n1;
  const std::int64_t n2 = window.n2;
  const std::int64_t tail_terms = truncation_order(spec, options.tol);
  const double scale = std::pow(x, alpha);
  const TiltedStream prototype(spec, report.tilt);
  const double level = x / static_cast<double>(n2 + 1);

  using Partial = std::array<std::pair<MeanAccumulator, std::uint64_t>, kQuantityCount>;
  auto chunks = map_chunks(options.replicas, options.policy, [&](std::uint64_t begin, std::uint64_t end) {
    Partial part{};
    auto score = [&](Quantity q, bool hit, double log_weight) {
      part[q].first.add(hit ? scale * std::exp(log_weight) : 0.0);
      part[q].second += hit ? 1 : 0;
    };
    for (std::uint64_t i = begin; i < end; ++i) {
      RngStream rng = stream.split(i);

      // Defensive mixture: the path comes from the base law or from the
      // stopped tilt with probability 1/2 each. The tilt runs until the
      // product first exceeds `level`, at the latest through A_n2. `log_lr`
      // is log dP/dQ_tilt of the path either way, and the mixture weight
      // 1 / (1/2 + dQ_tilt/dP / 2) never exceeds 2 min(1, dP/dQ_tilt).
      const bool tilted_path = rng.split(3).uniform() < 0.5;
      const TiltedSampler& sampler = prototype.sampler();
      auto draw = [&](bool tilting, RngStream& r, double& log_lr) {
        const double a = tilting && tilted_path ? sampler.draw(r) : draw_A(spec, r);
        if (tilting) log_lr += sampler.log_norm() - sampler.exponent() * std::log(a);
        return a;
      };
      auto mixture_log_weight = [](double log_lr) {
        return log_lr >= 0.0 ? std::log(2.0) - std::log1p(std::exp(-log_lr))
                             : std::log(2.0) + log_lr - std::log1p(std::exp(log_lr));
      };

      RngStream y_rng = rng.split(0);
      double y_lr = 0.0;
      double pi = 1.0;
      double partial = 0.0;
      double early = 0.0;
      bool tilting = true;
      for (std::int64_t j = 0; j <= n2; ++j) {
        pi *= draw(tilting, y_rng, y_lr);
        partial += pi;
        if (pi > level) tilting = false;
        if (j == n1) early = partial;
      }
      const double y_weight = mixture_log_weight(y_lr);
      const double remainder = pi * sample_Y_truncated(spec, tail_terms, y_rng);
      score(kYEarly, early > x, y_weight);
      score(kYLate, remainder > x, y_weight);
      score(kYFull, partial + remainder > x, y_weight);
      score(kYWindow, partial - early > x, y_weight);

      // Line 1 of the branching process in an environment drawn the same way.
      RngStream env_rng = rng.split(1);
      RngStream off_rng = rng.split(2);
      double z_lr = 0.0;
      tilting = true;
      double env_pi = 1.0;
      std::int64_t z = 1;  // the immigrant
      double z_early = 0.0;
      double z_late = 0.0;
      for (std::int64_t k = 0; z > 0; ++k) {
        if (k >= kDefaultGenerationCap) throw Error(ErrorKind::HorizonExceeded, "line 1 did not die out");
        const double a = draw(tilting && k <= n2, env_rng, z_lr);
        env_pi *= a;
        if (env_pi > level) tilting = false;
        z = negative_binomial(z, 1.0 / (1.0 + a), off_rng);  // Z_{1,k+1}
        if (k + 1 <= n1) z_early += static_cast<double>(z);
        if (k + 1 >= n2) z_late += static_cast<double>(z);
      }
      const double z_weight = mixture_log_weight(z_lr);
      score(kZEarly, z_early > x, z_weight);
      score(kZLate, z_late > x, z_weight);
    }
    return part;
  });

  Partial total{};
  for (const auto& part : chunks) {
    for (std::size_t q = 0; q < kQuantityCount; ++q) {
      total[q].first.merge(part[q].first);
      total[q].second += part[q].second;
    }
  }
  for (std::size_t q = 0; q < kQuantityCount; ++q) {
    TailRow row;
    row.quantity = kQuantityNames[q];
    row.x = x;
    row.n_window = (q == kYEarly || q == kZEarly) ? n1 : n2;
    row.estimate = score_estimate(total[q].first, total[q].second);
    row.below_threshold = row.estimate.ci.hi < report.threshold;
    report.rows.push_back(row);
  }
  return report;
}

void write_tail_csv(std::ostream& os, const NegligibilityReport& report) {
  os << "quantity,x,n_window,estimate,se,replicas\n";
  for (const auto& r : report.rows) {
    os << r.quantity << ',' << r.x << ',' << r.n_window << ',' << r.estimate.value << ',' << r.estimate.se << ','
       << r.estimate.replicas << '\n';
  }
}

}  // namespace rwre
