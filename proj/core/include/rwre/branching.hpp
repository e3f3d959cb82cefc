#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rwre/env_model.hpp"
#include "rwre/rng.hpp"

namespace rwre {

inline constexpr std::int64_t kDefaultGenerationCap = 100'000'000;

/// Failures before `successes` successes with success probability `omega`:
/// the sum of `successes` i.i.d. geometric(omega) counts on {0, 1, ...}.
/// Throws PopulationOverflow if the draw cannot fit in 63 bits.
std::int64_t negative_binomial(std::int64_t successes, double omega, RngStream& rng);

/// Next generation size from z particles plus one immigrant.
inline std::int64_t step_generation(std::int64_t z, double omega, RngStream& rng) {
  return negative_binomial(z + 1, omega, rng);
}

struct BranchOptions {
  bool track_lines = false;
  bool track_quenched_means = false;
};

/// Branching process with one immigrant per generation over [0, n].
struct BranchTrajectory {
  std::int64_t horizon = 0;
  std::vector<std::int64_t> Z;  // Z_0 .. Z_n, Z_0 = 0
  std::vector<double> omega;    // w_0 .. w_{n-1}
  std::vector<double> A;        // A_k = (1 - w_k) / w_k
  /// lines[i - 1][k - i] = Z_{i,k}, the progeny of immigrant i alive at
  /// time k, for k = i .. n. Empty unless lines were tracked.
  std::vector<std::vector<std::int64_t>> lines;
  /// quenched_mean[k] = E_w Z_k, with m_0 = 0 and m_k = A_{k-1} (m_{k-1} + 1).
  std::vector<double> quenched_mean;

  std::int64_t line(std::int64_t i, std::int64_t k) const;
};

BranchTrajectory simulate_Z(const EnvSpec& spec, std::int64_t n, RngStream& rng, BranchOptions options = {});

/// W_n: total progeny of immigrants 1..n (immigration stops after n).
std::int64_t total_progeny_W(const EnvSpec& spec, std::int64_t n, RngStream& rng,
                             std::int64_t generation_cap = kDefaultGenerationCap);

/// Regeneration structure of one long trajectory with immigration.
struct RegenSample {
  std::vector<std::int64_t> nu;          // nu_1 < nu_2 < ...
  std::vector<std::int64_t> cycle_sums;  // S_j = sum_{k = nu_{j-1}}^{nu_j - 1} Z_k
  std::vector<std::int64_t> cycle_peaks;

  /// Number of regeneration times nu_k (k >= 1) strictly below n.
  std::int64_t count_before(std::int64_t n) const;
};

RegenSample regenerations(const EnvSpec& spec, std::int64_t n_cycles, RngStream& rng,
                          std::int64_t generation_cap = kDefaultGenerationCap);

/// tau_t = inf{k >= 0 : Z_k > t}; nullopt unless it occurs before the first
/// return of Z to 0 within the trajectory.
std::optional<std::int64_t> first_passage_tau(const BranchTrajectory& trajectory, double t);

/// One regeneration cycle started from Z_0 = 0, summarized.
struct CycleSummary {
  std::int64_t length = 0;  // nu
  std::int64_t sum = 0;     // sum_{k < nu} Z_k
  std::int64_t peak = 0;
  /// Z_{tau_t} for each t of the grid, or -1 when tau_t >= nu.
  std::vector<std::int64_t> overshoot;
};

CycleSummary run_cycle(const EnvSpec& spec, RngStream& rng, std::span<const double> t_grid = {},
                       std::int64_t generation_cap = kDefaultGenerationCap);

/// Split of W_n by the age of each particle relative to its immigrant:
/// ages below n1 go to Wdown, ages in [n1, n2] to W0, ages above n2 to Wup.
/// W0 is further split into blocks of n1 consecutive immigrants; blocks
/// 1..p (p = floor(n / n1)) are full and block p + 1 holds the remainder.
struct BlockDecomposition {
  double x = 0.0;
  std::int64_t n = 0;
  DeviationWindow window;
  std::int64_t p = 0;
  std::int64_t W_total = 0;  // sum over generations of Z_k
  std::int64_t W0 = 0;
  std::int64_t Wdown = 0;
  std::int64_t Wup = 0;
  std::vector<std::int64_t> blocks;  // size p + 1
};

BlockDecomposition decompose_blocks(const EnvSpec& spec, std::int64_t n, const DeviationWindow& window, RngStream& rng,
                                    std::int64_t generation_cap = kDefaultGenerationCap);

/// Window taken from the profile's deviation_window(x, delta).
BlockDecomposition decompose_blocks(const EnvSpec& spec, const CumulantProfile& profile, std::int64_t n, double x,
                                    double delta, RngStream& rng);

/// Absolute defect of the telescoping identity for line 1
///
///   Zt_{k,n} - Z_{1,k} (Yt^k_{k,n-1} + 1)
///     = sum_{i=k+1}^{n} (Z_{1,i} - A_{i-1} Z_{1,i-1}) (Yt^i_{i,n-1} + 1),
///
/// where Zt_{k,n} = sum_{j=k}^{n} Z_{1,j} and Yt^i_{i,n-1} = sum_{j=i}^{n-1} A_i...A_j.
/// Needs a trajectory with tracked lines and 1 <= k < n <= horizon.
double lemma2_residual(const BranchTrajectory& trajectory, std::int64_t k, std::int64_t n);

/// Zt_{k,n} for line 1, the scale the residual is compared against.
double line_one_partial_total(const BranchTrajectory& trajectory, std::int64_t k, std::int64_t n);

}  // namespace rwre
