#include "rwre/branching.hpp"

#include <cmath>
#include <random>
#include <string>

#include "rwre/errors.hpp"

namespace rwre {
namespace {

constexpr double kPopulationLimit = 4.0e18;

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw Error(ErrorKind::PopulationOverflow, "64-bit population overflow");
  return out;
}

std::int64_t geometric(double omega, RngStream& rng) {
  const double v = std::floor(std::log(rng.uniform_open()) / std::log1p(-omega));
  if (!(v < kPopulationLimit)) throw Error(ErrorKind::PopulationOverflow, "geometric draw exceeds 2^62");
  return static_cast<std::int64_t>(v);
}

}  // namespace

std::int64_t negative_binomial(std::int64_t successes, double omega, RngStream& rng) {
  if (successes <= 0 || omega >= 1.0) return 0;
  if (successes == 1) return geometric(omega, rng);
  // Gamma-Poisson mixture: NB(k, w) = Poisson(Gamma(k, (1 - w) / w)).
  std::gamma_distribution<double> gamma(static_cast<double>(successes), (1.0 - omega) / omega);
  const double rate = gamma(rng);
  if (!(rate < kPopulationLimit)) throw Error(ErrorKind::PopulationOverflow, "offspring mean exceeds 2^62");
  if (rate <= 0.0) return 0;
  std::poisson_distribution<std::int64_t> poisson(rate);
  return poisson(rng);
}

std::int64_t BranchTrajectory::line(std::int64_t i, std::int64_t k) const {
  if (i < 1 || k < i || i > static_cast<std::int64_t>(lines.size())) return 0;
  const auto& row = lines[static_cast<std::size_t>(i - 1)];
  const auto idx = static_cast<std::size_t>(k - i);
  return idx < row.size() ? row[idx] : 0;
}

BranchTrajectory simulate_Z(const EnvSpec& spec, std::int64_t n, RngStream& rng, BranchOptions options) {
  if (n < 1) throw Error(ErrorKind::OutOfDomain, "simulate_Z needs n >= 1");
  RngStream env_rng = rng.split(0);
  RngStream off_rng = rng.split(1);
  const auto horizon = static_cast<std::size_t>(n);

  BranchTrajectory traj;
  traj.horizon = n;
  traj.Z.assign(horizon + 1, 0);
  traj.omega.resize(horizon);
  traj.A.resize(horizon);
  for (std::size_t k = 0; k < horizon; ++k) {
    traj.omega[k] = draw_omega(spec, env_rng);
    traj.A[k] = (1.0 - traj.omega[k]) / traj.omega[k];
  }

  if (options.track_lines) {
    traj.lines.resize(horizon);
    for (std::size_t i = 1; i <= horizon; ++i) traj.lines[i - 1].assign(horizon - i + 1, 0);
    for (std::size_t k = 0; k < horizon; ++k) {
      // Lines of immigrants 1..k move from time k to k + 1; immigrant k + 1
      // starts its line with a single geometric draw.
      std::int64_t total = 0;
      for (std::size_t i = 1; i <= k; ++i) {
        auto& row = traj.lines[i - 1];
        const std::int64_t next = negative_binomial(row[k - i], traj.omega[k], off_rng);
        row[k + 1 - i] = next;
        total = checked_add(total, next);
      }
      const std::int64_t fresh = negative_binomial(1, traj.omega[k], off_rng);
      traj.lines[k][0] = fresh;
      traj.Z[k + 1] = checked_add(total, fresh);
    }
  } else {
    for (std::size_t k = 0; k < horizon; ++k) {
      traj.Z[k + 1] = step_generation(traj.Z[k], traj.omega[k], off_rng);
    }
  }

  if (options.track_quenched_means) {
    traj.quenched_mean.assign(horizon + 1, 0.0);
    for (std::size_t k = 1; k <= horizon; ++k) {
      traj.quenched_mean[k] = traj.A[k - 1] * (traj.quenched_mean[k - 1] + 1.0);
    }
  }
  return traj;
}

std::int64_t total_progeny_W(const EnvSpec& spec, std::int64_t n, RngStream& rng, std::int64_t generation_cap) {
  if (n < 0) throw Error(ErrorKind::OutOfDomain, "total_progeny_W needs n >= 0");
  RngStream env_rng = rng.split(0);
  RngStream off_rng = rng.split(1);
  std::int64_t z = 0;
  std::int64_t w = 0;
  for (std::int64_t k = 0;; ++k) {
    const std::int64_t parents = z + (k < n ? 1 : 0);
    if (parents == 0) break;
    if (k >= generation_cap) {
      throw Error(ErrorKind::HorizonExceeded, "no extinction within " + std::to_string(generation_cap) + " generations");
    }
    z = negative_binomial(parents, draw_omega(spec, env_rng), off_rng);
    w = checked_add(w, z);
  }
  return w;
}

std::int64_t RegenSample::count_before(std::int64_t n) const {
  std::int64_t count = 0;
  for (const auto v : nu) {
    if (v < n) ++count;
  }
  return count;
}

RegenSample regenerations(const EnvSpec& spec, std::int64_t n_cycles, RngStream& rng, std::int64_t generation_cap) {
  if (n_cycles < 1) throw Error(ErrorKind::OutOfDomain, "regenerations needs n_cycles >= 1");
  RngStream env_rng = rng.split(0);
  RngStream off_rng = rng.split(1);
  RegenSample sample;
  std::int64_t k = 0;
  std::int64_t z = 0;
  std::int64_t sum = 0;
  std::int64_t peak = 0;
  std::int64_t cycle_start = 0;
  while (static_cast<std::int64_t>(sample.nu.size()) < n_cycles) {
    if (k - cycle_start >= generation_cap) {
      throw Error(ErrorKind::HorizonExceeded, "cycle longer than " + std::to_string(generation_cap) + " generations");
    }
    z = step_generation(z, draw_omega(spec, env_rng), off_rng);
    ++k;
    if (z == 0) {
      sample.nu.push_back(k);
      sample.cycle_sums.push_back(sum);
      sample.cycle_peaks.push_back(peak);
      sum = 0;
      peak = 0;
      cycle_start = k;
    } else {
      sum = checked_add(sum, z);
      peak = std::max(peak, z);
    }
  }
  return sample;
}

std::optional<std::int64_t> first_passage_tau(const BranchTrajectory& trajectory, double t) {
  for (std::size_t k = 0; k < trajectory.Z.size(); ++k) {
    const auto z = trajectory.Z[k];
    if (static_cast<double>(z) > t) return static_cast<std::int64_t>(k);
    if (k > 0 && z == 0) return std::nullopt;
  }
  return std::nullopt;
}

CycleSummary run_cycle(const EnvSpec& spec, RngStream& rng, std::span<const double> t_grid,
                       std::int64_t generation_cap) {
  RngStream env_rng = rng.split(0);
  RngStream off_rng = rng.split(1);
  CycleSummary out;
  out.overshoot.assign(t_grid.size(), -1);
  std::size_t pending = t_grid.size();
  std::int64_t z = 0;
  for (;;) {
    if (out.length >= generation_cap) {
      throw Error(ErrorKind::HorizonExceeded, "cycle longer than " + std::to_string(generation_cap) + " generations");
    }
    z = step_generation(z, draw_omega(spec, env_rng), off_rng);
    ++out.length;
    if (z == 0) break;
    out.sum = checked_add(out.sum, z);
    out.peak = std::max(out.peak, z);
    if (pending > 0) {
      for (std::size_t g = 0; g < t_grid.size(); ++g) {
        if (out.overshoot[g] < 0 && static_cast<double>(z) > t_grid[g]) {
          out.overshoot[g] = z;
          --pending;
        }
      }
    }
  }
  return out;
}

BlockDecomposition decompose_blocks(const EnvSpec& spec, std::int64_t n, const DeviationWindow& window, RngStream& rng,
                                    std::int64_t generation_cap) {
  if (n < 1) throw Error(ErrorKind::OutOfDomain, "decompose_blocks needs n >= 1");
  if (window.n1 < 1 || window.n2 < window.n1) throw Error(ErrorKind::WindowDegenerate, "window needs 1 <= n1 <= n2");
  RngStream env_rng = rng.split(0);
  RngStream off_rng = rng.split(1);

  BlockDecomposition out;
  out.n = n;
  out.window = window;
  out.p = n / window.n1;
  out.blocks.assign(static_cast<std::size_t>(out.p + 1), 0);

  struct Line {
    std::int64_t immigrant;
    std::int64_t size;  // parents at the current generation
  };
  std::vector<Line> active;
  auto block_of = [&](std::int64_t j) {
    const std::int64_t k = (j - 1) / window.n1;  // 0-based block
    return static_cast<std::size_t>(std::min(k, out.p));
  };

  for (std::int64_t m = 0; m < n || !active.empty(); ++m) {
    if (m >= generation_cap) throw Error(ErrorKind::HorizonExceeded, "lines not extinct within generation cap");
    const double w = draw_omega(spec, env_rng);
    // The immigrant entering at time m is the lone parent of its line.
    if (m < n) active.push_back({m + 1, 1});
    std::int64_t generation_total = 0;
    std::size_t keep = 0;
    for (auto& line : active) {
      const std::int64_t next = negative_binomial(line.size, w, off_rng);
      line.size = next;
      if (next == 0) continue;
      generation_total = checked_add(generation_total, next);
      const std::int64_t age = (m + 1) - line.immigrant;
      if (age < window.n1) {
        out.Wdown = checked_add(out.Wdown, next);
      } else if (age <= window.n2) {
        out.W0 = checked_add(out.W0, next);
        auto& block = out.blocks[block_of(line.immigrant)];
        block = checked_add(block, next);
      } else {
        out.Wup = checked_add(out.Wup, next);
      }
      active[keep++] = line;
    }
    active.resize(keep);
    out.W_total = checked_add(out.W_total, generation_total);
  }
  return out;
}

BlockDecomposition decompose_blocks(const EnvSpec& spec, const CumulantProfile& profile, std::int64_t n, double x,
                                    double delta, RngStream& rng) {
  const DeviationWindow window = deviation_window(profile, x, delta);
  BlockDecomposition out = decompose_blocks(spec, n, window, rng);
  out.x = x;
  return out;
}

double line_one_partial_total(const BranchTrajectory& trajectory, std::int64_t k, std::int64_t n) {
  double total = 0.0;
  for (std::int64_t j = k; j <= n; ++j) total += static_cast<double>(trajectory.line(1, j));
  return total;
}

double lemma2_residual(const BranchTrajectory& trajectory, std::int64_t k, std::int64_t n) {
  if (trajectory.lines.empty()) throw Error(ErrorKind::OutOfDomain, "lemma2_residual needs tracked lines");
  if (!(1 <= k && k < n && n <= trajectory.horizon)) {
    throw Error(ErrorKind::OutOfDomain, "lemma2_residual needs 1 <= k < n <= horizon");
  }
  const auto& A = trajectory.A;
  // tail[i] = Yt^i_{i,n-1} = A_i (1 + tail[i+1]), tail[n] = 0.
  std::vector<double> tail(static_cast<std::size_t>(n + 1), 0.0);
  for (std::int64_t i = n - 1; i >= k; --i) {
    tail[static_cast<std::size_t>(i)] = A[static_cast<std::size_t>(i)] * (1.0 + tail[static_cast<std::size_t>(i + 1)]);
  }
  auto z = [&](std::int64_t i) { return static_cast<double>(trajectory.line(1, i)); };
  const double lhs = line_one_partial_total(trajectory, k, n) - z(k) * (tail[static_cast<std::size_t>(k)] + 1.0);
  double rhs = 0.0;
  for (std::int64_t i = k + 1; i <= n; ++i) {
    rhs += (z(i) - A[static_cast<std::size_t>(i - 1)] * z(i - 1)) * (tail[static_cast<std::size_t>(i)] + 1.0);
  }
  return std::abs(lhs - rhs);
}

}  // namespace rwre
