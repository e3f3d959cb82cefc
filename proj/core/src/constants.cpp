#include "rwre/constants.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>

#include "rwre/branching.hpp"
#include "rwre/errors.hpp"

namespace rwre {

std::string to_string(TailMethod m) {
  switch (m) {
    case TailMethod::Mean: return "mean";
    case TailMethod::EmpiricalTailPlateau: return "empirical-tail-plateau";
    case TailMethod::ConditionalMoment: return "conditional-moment";
    case TailMethod::Hill: return "hill";
    case TailMethod::Analytic: return "analytic";
    case TailMethod::Composed: return "composed";
  }
  return "unknown";
}

namespace {

std::vector<std::string> spec_flags(const EnvSpec& spec) {
  std::vector<std::string> flags;
  if (is_arithmetic(spec)) flags.emplace_back("arithmetic");
  return flags;
}

}  // namespace

TailEstimate estimate_Enu(const EnvSpec& spec, std::uint64_t replicas, const RngStream& stream, ExecPolicy policy) {
  auto chunks = map_chunks(replicas, policy, [&](std::uint64_t begin, std::uint64_t end) {
    MeanAccumulator acc;
    for (std::uint64_t i = begin; i < end; ++i) {
      RngStream rng = stream.split(i);
      acc.add(static_cast<double>(run_cycle(spec, rng).length));
    }
    return acc;
  });
  MeanAccumulator total;
  for (const auto& c : chunks) total.merge(c);
  TailEstimate out;
  out.quantity = "E_nu";
  out.estimate = total.mean();
  out.se = total.se();
  out.replicas = total.count();
  out.method = TailMethod::Mean;
  return out;
}

std::vector<double> sample_cycle_sums(const EnvSpec& spec, std::uint64_t replicas, const RngStream& stream,
                                      ExecPolicy policy) {
  return map_replicas<double>(replicas, policy, [&](std::uint64_t i) {
    RngStream rng = stream.split(i);
    return static_cast<double>(run_cycle(spec, rng).sum);
  });
}

C3TailResult estimate_C3_tail(const EnvSpec& spec, double alpha, std::span<const double> x_grid,
                              std::uint64_t replicas, const RngStream& stream, ExecPolicy policy) {
  if (x_grid.empty()) throw Error(ErrorKind::GridUnstable, "empty x grid");
  const std::size_t G = x_grid.size();
  std::vector<double> weights(G);
  for (std::size_t g = 0; g < G; ++g) weights[g] = std::pow(x_grid[g], alpha);

  struct Partial {
    MeanAccumulator plateau;
    std::vector<std::uint64_t> hits;
  };
  auto chunks = map_chunks(replicas, policy, [&](std::uint64_t begin, std::uint64_t end) {
    Partial part;
    part.hits.assign(G, 0);
    for (std::uint64_t i = begin; i < end; ++i) {
      RngStream rng = stream.split(i);
      const double s = static_cast<double>(run_cycle(spec, rng).sum);
      double score = 0.0;
      for (std::size_t g = 0; g < G; ++g) {
        if (s > x_grid[g]) {
          score += weights[g];
          ++part.hits[g];
        }
      }
      part.plateau.add(score / static_cast<double>(G));
    }
    return part;
  });
  MeanAccumulator plateau;
  std::vector<std::uint64_t> hits(G, 0);
  for (const auto& part : chunks) {
    plateau.merge(part.plateau);
    for (std::size_t g = 0; g < G; ++g) hits[g] += part.hits[g];
  }

  C3TailResult result;
  double lo = kInfinity, hi = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    McEstimate e = indicator_estimate(hits[g], replicas);
    e.value *= weights[g];
    e.se *= weights[g];
    e.ci = {e.ci.lo * weights[g], e.ci.hi * weights[g]};
    lo = std::min(lo, e.value);
    hi = std::max(hi, e.value);
    result.curve.push_back(e);
  }
  result.flatness = lo > 0.0 ? hi / lo : kInfinity;

  auto& est = result.estimate;
  est.quantity = "C3";
  est.method = TailMethod::EmpiricalTailPlateau;
  est.estimate = plateau.mean();
  est.se = plateau.se();
  est.replicas = replicas;
  est.grid.assign(x_grid.begin(), x_grid.end());
  est.flags = spec_flags(spec);

  const auto top = static_cast<std::size_t>(std::max_element(x_grid.begin(), x_grid.end()) - x_grid.begin());
  if (hits[top] < 10) {
    throw Error(ErrorKind::GridUnstable, "only " + std::to_string(hits[top]) + " cycles exceed x = " +
                                             std::to_string(x_grid[top]) + "; need >= 10");
  }
  if (result.flatness > 2.0) {
    throw Error(ErrorKind::GridUnstable, "plateau max/min = " + std::to_string(result.flatness) + " > 2");
  }
  return result;
}

C3ConditionalResult estimate_C3_conditional(const EnvSpec& spec, double alpha, const TailEstimate& C2,
                                            std::span<const double> t_grid, std::uint64_t replicas,
                                            const RngStream& stream, ExecPolicy policy) {
  if (t_grid.empty()) throw Error(ErrorKind::NotStabilized, "empty t grid");
  const std::size_t G = t_grid.size();
  struct Partial {
    std::vector<MeanAccumulator> joint;
    std::vector<MeanAccumulator> conditional;
    std::vector<std::uint64_t> hits;
  };
  auto chunks = map_chunks(replicas, policy, [&](std::uint64_t begin, std::uint64_t end) {
    Partial part;
    part.joint.resize(G);
    part.conditional.resize(G);
    part.hits.assign(G, 0);
    for (std::uint64_t i = begin; i < end; ++i) {
      RngStream rng = stream.split(i);
      const CycleSummary cycle = run_cycle(spec, rng, t_grid);
      for (std::size_t g = 0; g < G; ++g) {
        const bool hit = cycle.overshoot[g] >= 0;
        const double moment = hit ? std::pow(static_cast<double>(cycle.overshoot[g]), alpha) : 0.0;
        part.joint[g].add(moment);
        if (hit) {
          part.conditional[g].add(moment);
          ++part.hits[g];
        }
      }
    }
    return part;
  });

  std::vector<MeanAccumulator> joint(G), conditional(G);
  std::vector<std::uint64_t> hits(G, 0);
  for (const auto& part : chunks) {
    for (std::size_t g = 0; g < G; ++g) {
      joint[g].merge(part.joint[g]);
      conditional[g].merge(part.conditional[g]);
      hits[g] += part.hits[g];
    }
  }

  C3ConditionalResult result;
  for (std::size_t g = 0; g < G; ++g) {
    FirstPassagePoint pt;
    pt.t = t_grid[g];
    pt.hit_probability = indicator_estimate(hits[g], replicas);
    pt.conditional_moment = score_estimate(conditional[g], hits[g]);
    pt.joint_moment = score_estimate(joint[g], hits[g]);
    result.curve.push_back(pt);
  }

  // Largest t whose limit value moved by less than 10% since t/2.
  std::vector<std::size_t> order(G);
  for (std::size_t g = 0; g < G; ++g) order[g] = g;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t_grid[a] > t_grid[b]; });
  std::optional<std::size_t> chosen;
  for (const std::size_t g : order) {
    const double t = t_grid[g];
    for (std::size_t h = 0; h < G; ++h) {
      if (std::abs(t_grid[h] - 0.5 * t) > 1e-9 * t) continue;
      const double v = result.curve[g].joint_moment.value;
      const double v_half = result.curve[h].joint_moment.value;
      if (v > 0.0 && std::abs(v - v_half) < 0.1 * v) {
        chosen = g;
        result.stabilization = std::abs(v - v_half) / v;
      }
      break;
    }
    if (chosen) break;
  }
  if (!chosen) {
    throw Error(ErrorKind::NotStabilized, "E[Z_tau^alpha ; tau < nu] never within 10% between t/2 and t");
  }

  const McEstimate& limit = result.curve[*chosen].joint_moment;
  result.t_used = t_grid[*chosen];
  auto& est = result.estimate;
  est.quantity = "C3";
  est.method = TailMethod::ConditionalMoment;
  est.estimate = C2.estimate * limit.value;
  est.se = std::hypot(C2.estimate * limit.se, limit.value * C2.se);
  est.replicas = replicas;
  est.grid.assign(t_grid.begin(), t_grid.end());
  est.flags = spec_flags(spec);
  return result;
}

TailEstimate ratio_C1(const TailEstimate& C3, const TailEstimate& Enu) {
  TailEstimate out;
  out.quantity = "C1";
  out.method = TailMethod::Composed;
  out.estimate = C3.estimate / Enu.estimate;
  out.se = std::hypot(C3.se / Enu.estimate, C3.estimate * Enu.se / (Enu.estimate * Enu.estimate));
  out.replicas = std::min(C3.replicas, Enu.replicas);
  out.flags = C3.flags;
  return out;
}

ComposedConstants compose_constants(const CumulantProfile& profile, const TailEstimate& C1) {
  ComposedConstants out;
  out.C1 = C1;
  out.C_alpha = C1;
  out.C_alpha.quantity = "C_alpha";
  out.C_alpha.method = TailMethod::Composed;
  if (profile.alpha > 1.0) {
    if (!(profile.speed_v > 0.0)) throw Error(ErrorKind::RegimeMismatch, "alpha > 1 but v = 0");
    const double factor = std::pow(2.0 * profile.speed_v, profile.alpha);
    out.C_alpha.estimate = factor * C1.estimate;
    out.C_alpha.se = factor * C1.se;
  }
  return out;
}

TailEstimate hill_diagnostic(std::span<const double> samples, double k_fraction) {
  if (samples.size() < 1000) throw Error(ErrorKind::TooFewSamples, "Hill estimator needs >= 1000 samples");
  if (!(k_fraction > 0.0 && k_fraction <= 0.1)) throw Error(ErrorKind::OutOfDomain, "k_fraction must lie in (0, 0.1]");
  std::vector<double> sorted(samples.begin(), samples.end());
  const auto k = static_cast<std::size_t>(std::floor(k_fraction * static_cast<double>(sorted.size())));
  if (k < 2) throw Error(ErrorKind::TooFewSamples, "Hill estimator needs k >= 2 order statistics");
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(), std::greater<>());
  const double threshold = sorted[k];
  if (!(threshold > 0.0)) throw Error(ErrorKind::TooFewSamples, "Hill threshold order statistic is not positive");
  double h = 0.0;
  for (std::size_t i = 0; i < k; ++i) h += std::log(sorted[i] / threshold);
  h /= static_cast<double>(k);
  if (!(h > 0.0)) throw Error(ErrorKind::TooFewSamples, "degenerate tail: top order statistics are tied");
  TailEstimate out;
  out.quantity = "tail_index";
  out.method = TailMethod::Hill;
  out.estimate = 1.0 / h;
  out.se = out.estimate / std::sqrt(static_cast<double>(k));
  out.replicas = samples.size();
  out.grid = {threshold};
  return out;
}

void write_constants_csv(std::ostream& os, std::span<const TailEstimate> rows) {
  os << "quantity,method,estimate,se,replicas,grid_lo,grid_hi,flags\n";
  for (const auto& r : rows) {
    double lo = 0.0, hi = 0.0;
    if (!r.grid.empty()) {
      lo = *std::min_element(r.grid.begin(), r.grid.end());
      hi = *std::max_element(r.grid.begin(), r.grid.end());
    }
    std::string flags;
    for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
    os << r.quantity << ',' << to_string(r.method) << ',' << r.estimate << ',' << r.se << ',' << r.replicas << ','
       << lo << ',' << hi << ',' << flags << '\n';
  }
}

}  // namespace rwre
