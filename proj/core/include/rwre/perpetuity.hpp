#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rwre/env_model.hpp"
#include "rwre/parallel.hpp"
#include "rwre/rng.hpp"
#include "rwre/stats.hpp"

namespace rwre {

/// Forward and backward affine recursions driven by the same A_0..A_n.
///   Y_0 = A_0,  Y_k = A_k (Y_{k-1} + 1)          (forward)
///   Yt_k = sum_{j <= k} Pi_{0,j},  Pi_{0,j} = A_0 ... A_j   (backward)
/// For fixed k, Y_k and Yt_k have the same law.
struct PerpetuityPath {
  std::int64_t horizon = 0;
  std::vector<double> A;
  std::vector<double> Y;
  std::vector<double> Ytilde;
  std::vector<double> Pi;
};

PerpetuityPath run_perpetuity(const EnvSpec& spec, std::int64_t n, RngStream& rng);

/// Smallest N with lambda(theta)^N < tol, theta = min(1, 0.9 alpha).
/// Laws without a positive root (P(A > 1) = 0) use theta = 1.
std::int64_t truncation_order(const EnvSpec& spec, double tol);

/// Yt_N, the perpetuity truncated after N + 1 terms.
double sample_Y_truncated(const EnvSpec& spec, std::int64_t N, RngStream& rng);

struct YInfApprox {
  double value = 0.0;
  std::int64_t terms = 0;  // N
};

YInfApprox approx_Y_inf(const EnvSpec& spec, double tol, RngStream& rng);

/// alpha * E[A^alpha log A] = alpha * Lambda'(alpha), since lambda(alpha) = 1.
double kesten_C2_denominator(const EnvSpec& spec);

/// Closed-form C2 where the numerator E[(Yt+1)^alpha - Yt^alpha] is known
/// exactly: alpha = 1 (numerator 1) and alpha = 2 (numerator 2 E Yt + 1).
std::optional<double> kesten_C2_closed_form(const EnvSpec& spec);

/// Monte Carlo of C2 = E[(Yt_inf + 1)^alpha - Yt_inf^alpha] / (alpha E[A^alpha log A]).
McEstimate kesten_C2(const EnvSpec& spec, std::uint64_t replicas, const RngStream& stream, double tol = 1e-6,
                     ExecPolicy policy = {});

/// Empirical x^alpha P(Yt_inf > x) at each x of the grid (plain Monte Carlo).
std::vector<McEstimate> perpetuity_tail_profile(const EnvSpec& spec, std::span<const double> x_grid,
                                                std::uint64_t replicas, const RngStream& stream, double tol = 1e-6,
                                                ExecPolicy policy = {});

/// A-draws under the s-tilted law with the running log likelihood ratio
/// n Lambda(s) - s sum log A_k of the base law against the tilted one.
class TiltedStream {
 public:
  TiltedStream(const EnvSpec& spec, double s);

  double next(RngStream& rng);
  double log_weight() const noexcept { return log_weight_; }
  double weight() const;
  void reset() noexcept { log_weight_ = 0.0; }
  const TiltedSampler& sampler() const noexcept { return sampler_; }

 private:
  TiltedSampler sampler_;
  double log_weight_ = 0.0;
};

/// Unbiased estimate of P(Pi_n > x), Pi_n = A_1 ... A_n, by sampling under
/// the s-tilted law (s defaults to alpha).
McEstimate tilted_product_tail(const EnvSpec& spec, std::int64_t n, double x, std::uint64_t replicas,
                               const RngStream& stream, std::optional<double> tilt = std::nullopt,
                               ExecPolicy policy = {});

/// Plain Monte Carlo of P(Pi_n > x) with a Wilson interval.
McEstimate plain_product_tail(const EnvSpec& spec, std::int64_t n, double x, std::uint64_t replicas,
                              const RngStream& stream, ExecPolicy policy = {});

struct TailRow {
  std::string quantity;
  double x = 0.0;
  std::int64_t n_window = 0;
  McEstimate estimate;  // normalized by x^alpha
  bool below_threshold = false;
};

struct NegligibilityReport {
  DeviationWindow window;
  double alpha = 0.0;
  double threshold = 0.0;
  double tilt = 0.0;
  std::vector<TailRow> rows;

  const TailRow& row(const std::string& quantity) const;
};

struct NegligibilityOptions {
  std::uint64_t replicas = 100000;
  /// Smallness threshold; defaults to 0.2 * C2 (closed form when available).
  std::optional<double> threshold;
  /// Exponent of the tilt applied to the environment until the product first
  /// exceeds x / (n2 + 1), at the latest through the window end; defaults to alpha.
  /// Each replica follows the tilt or the base law with probability 1/2, so
  /// its weight is at most 2.
  std::optional<double> tilt;
  double tol = 1e-8;
  ExecPolicy policy;
};

/// Normalized tails x^alpha P(.) > x of the early and late parts of the
/// perpetuity and of line 1 of the branching process, plus the full and
/// in-window perpetuity tails. Each row is below_threshold when its upper
/// 95% bound is under the threshold.
NegligibilityReport window_negligibility(const EnvSpec& spec, double x, double delta, const RngStream& stream,
                                         NegligibilityOptions options = {});

/// Same with an explicit window and tail exponent (for laws without alpha).
NegligibilityReport window_negligibility(const EnvSpec& spec, double x, const DeviationWindow& window,
                                         double alpha, const RngStream& stream, NegligibilityOptions options);

/// CSV: quantity,x,n_window,estimate,se,replicas
void write_tail_csv(std::ostream& os, const NegligibilityReport& report);

}  // namespace rwre
