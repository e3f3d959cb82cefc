#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rwre/rng.hpp"

namespace rwre {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Parametric laws of the multiplier A = (1 - w) / w. The site probability
// is recovered as w = 1 / (1 + A).
struct TwoPointLaw {
  double a1;
  double a2;
  double p;  // P(A = a1)
};
struct DiscreteLaw {
  std::vector<double> atoms;
  std::vector<double> probs;
};
/// w ~ Beta(a, b); E A^s = B(a - s, b + s) / B(a, b), finite iff -b < s < a.
struct BetaLaw {
  double a;
  double b;
};
struct DeterministicLaw {
  double a;
};

/// Law of the i.i.d. environment. Immutable once constructed.
class EnvSpec {
 public:
  using Variant = std::variant<TwoPointLaw, DiscreteLaw, BetaLaw, DeterministicLaw>;

  static EnvSpec two_point(double a1, double a2, double p);
  static EnvSpec discrete(std::vector<double> atoms, std::vector<double> probs);
  static EnvSpec beta(double a, double b);
  static EnvSpec deterministic(double a);

  /// Rejects the law with NotTransient unless E log A < 0.
  EnvSpec& require_transient();

  const Variant& law() const noexcept { return law_; }
  bool is_beta() const noexcept { return std::holds_alternative<BetaLaw>(law_); }

  /// Atoms and weights for the finitely supported families; empty for Beta.
  std::span<const double> atoms() const noexcept { return atoms_; }
  std::span<const double> probs() const noexcept { return probs_; }

  /// sup{ s : E A^s < infinity }.
  double alpha_inf() const noexcept;

  std::string family() const;

 private:
  explicit EnvSpec(Variant law);

  Variant law_;
  std::vector<double> atoms_;
  std::vector<double> probs_;
};

enum class Regime { Ballistic, SubBallistic, Boundary };
std::string to_string(Regime r);

struct CumulantProfile {
  double alpha = 0.0;        // root of lambda(alpha) = 1
  double rho0 = 0.0;         // Lambda'(alpha)
  double mean_A = 0.0;       // rho = lambda(1)
  double mean_logA = 0.0;
  double speed_v = 0.0;
  Regime regime = Regime::Ballistic;
  double alpha_inf = kInfinity;
  double rho_inf = kInfinity;
  bool arithmetic_flag = false;
};

/// E A^s. Throws MomentDiverges outside the moment domain.
double lambda(const EnvSpec& spec, double s);

/// E A^s for Beta laws by tanh-sinh quadrature of the density integral.
/// Independent of the closed form; used for cross-checks.
double lambda_quadrature(const EnvSpec& spec, double s);

/// Lambda(s) = log E A^s.
double log_cumulant(const EnvSpec& spec, double s);

/// Lambda'(s); analytic for every shipped family.
double lambda_prime(const EnvSpec& spec, double s);

/// Central-difference Lambda' with step 1e-6 * max(1, |s|).
double lambda_prime_numeric(const EnvSpec& spec, double s);

double mean_log_A(const EnvSpec& spec);
double prob_A_greater_one(const EnvSpec& spec);

/// E w, i.e. the probability that a geometric(w) offspring count is zero.
double mean_omega(const EnvSpec& spec);

/// Unique alpha > 0 with lambda(alpha) = 1 (relative tolerance 1e-10).
double solve_alpha(const EnvSpec& spec);

/// Solves Lambda'(s) = rho for s >= 0.
double tilt_for_level(const EnvSpec& spec, double rho);

/// sup_s { s rho - Lambda(s) } for rho in [E log A, rho_inf).
double legendre(const EnvSpec& spec, double rho);

double rho_inf(const EnvSpec& spec);

/// True iff log A is supported on a lattice (all pairwise ratios of the
/// nonzero log-atoms rational). Always false for Beta.
bool is_arithmetic(const EnvSpec& spec);

CumulantProfile profile(const EnvSpec& spec);

/// Deviation window around n0 = floor(log x / rho0) of half-width
/// m = floor((log x)^(1/2 + delta)).
struct DeviationWindow {
  std::int64_t n0 = 0;
  std::int64_t m = 0;
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  bool clamped = false;  // n1 was raised to 1
};

/// Raw window with n1 clamped at 1 (flagged). Requires x > e, 0 < delta < 1/2.
DeviationWindow window_bounds(double rho0, double x, double delta);

/// Window for asymptotic use; throws WindowDegenerate when n0 - m <= 0.
DeviationWindow deviation_window(const CumulantProfile& profile, double x, double delta);

/// One draw of A.
double draw_A(const EnvSpec& spec, RngStream& rng);

/// One draw of w = 1 / (1 + A), computed without cancellation for Beta.
double draw_omega(const EnvSpec& spec, RngStream& rng);

std::vector<double> sample_A(const EnvSpec& spec, RngStream& rng, std::size_t count);

/// Sampler for the tilted law dP_s proportional to A^s dP. Discrete laws
/// are reweighted atoms; Beta(a, b) tilts to Beta(a - s, b + s).
/// Throws TiltUnavailable when the tilted law has no exact sampler.
class TiltedSampler {
 public:
  TiltedSampler(const EnvSpec& spec, double s);

  double draw(RngStream& rng) const;
  double exponent() const noexcept { return s_; }
  /// log lambda(s), so the likelihood ratio of one draw is exp(log_norm) * A^-s.
  double log_norm() const noexcept { return log_norm_; }
  /// Tilted atom probabilities (finitely supported laws only).
  std::span<const double> tilted_probs() const noexcept { return cdf_weights_; }

 private:
  EnvSpec spec_;
  double s_;
  double log_norm_;
  std::vector<double> cdf_weights_;
  std::vector<double> cdf_;
};

}  // namespace rwre
