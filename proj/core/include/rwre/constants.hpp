#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rwre/env_model.hpp"
#include "rwre/parallel.hpp"
#include "rwre/rng.hpp"
#include "rwre/stats.hpp"

namespace rwre {

enum class TailMethod { Mean, EmpiricalTailPlateau, ConditionalMoment, Hill, Analytic, Composed };
std::string to_string(TailMethod m);

struct TailEstimate {
  std::string quantity;
  double estimate = 0.0;
  double se = 0.0;
  std::uint64_t replicas = 0;
  TailMethod method = TailMethod::Mean;
  std::vector<double> grid;  // x-grid or t-grid used, if any
  std::vector<std::string> flags;
};

/// E nu, the mean regeneration time, by plain Monte Carlo over cycles.
TailEstimate estimate_Enu(const EnvSpec& spec, std::uint64_t replicas, const RngStream& stream,
                          ExecPolicy policy = {});

struct C3TailResult {
  TailEstimate estimate;
  std::vector<McEstimate> curve;  // x^alpha P(S_nu > x) per grid point
  double flatness = 0.0;          // max / min of the curve
};

/// Plateau estimate of C3: the mean over the grid of x^alpha P(S_nu > x),
/// S_nu the population summed over one cycle. The standard error treats
/// the per-cycle grid average as one score, so grid correlation is exact.
/// Throws GridUnstable if the top grid point has fewer than 10 exceedances
/// or the plateau max/min ratio exceeds 2.
C3TailResult estimate_C3_tail(const EnvSpec& spec, double alpha, std::span<const double> x_grid,
                              std::uint64_t replicas, const RngStream& stream, ExecPolicy policy = {});

struct FirstPassagePoint {
  double t = 0.0;
  McEstimate hit_probability;     // P(tau_t < nu)
  McEstimate conditional_moment;  // E[Z_{tau_t}^alpha | tau_t < nu]
  McEstimate joint_moment;        // E[Z_{tau_t}^alpha ; tau_t < nu]
};

struct C3ConditionalResult {
  TailEstimate estimate;
  std::vector<FirstPassagePoint> curve;
  double t_used = 0.0;
  double stabilization = 0.0;  // relative change of the limit between t/2 and t
};

/// First-passage route to C3: C2 times the limit in t of
/// E[Z_{tau_t}^alpha ; tau_t < nu] = P(tau_t < nu) E[Z_{tau_t}^alpha | tau_t < nu].
/// The limit is read at the largest t of the grid whose value is within 10%
/// of the value at t/2 (t/2 must also be on the grid). Throws NotStabilized
/// when no such t exists.
C3ConditionalResult estimate_C3_conditional(const EnvSpec& spec, double alpha, const TailEstimate& C2,
                                            std::span<const double> t_grid, std::uint64_t replicas,
                                            const RngStream& stream, ExecPolicy policy = {});

/// C1 = C3 / E nu, delta-method standard error.
TailEstimate ratio_C1(const TailEstimate& C3, const TailEstimate& Enu);

struct ComposedConstants {
  TailEstimate C1;
  TailEstimate C_alpha;
};

/// C(alpha) = (2v)^alpha C1 for alpha > 1, C1 otherwise.
/// Throws RegimeMismatch when alpha > 1 but v = 0.
ComposedConstants compose_constants(const CumulantProfile& profile, const TailEstimate& C1);

/// Hill estimator of the tail index on the top k_fraction order statistics.
/// Throws TooFewSamples for fewer than 1000 samples or a degenerate tail.
TailEstimate hill_diagnostic(std::span<const double> samples, double k_fraction);

/// Cycle sums S_nu of independent regeneration cycles.
std::vector<double> sample_cycle_sums(const EnvSpec& spec, std::uint64_t replicas, const RngStream& stream,
                                      ExecPolicy policy = {});

/// CSV: quantity,method,estimate,se,replicas,grid_lo,grid_hi,flags
void write_constants_csv(std::ostream& os, std::span<const TailEstimate> rows);

}  // namespace rwre
