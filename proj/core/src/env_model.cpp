#include "rwre/env_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "rwre/errors.hpp"

namespace rwre {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double log_beta_ratio(const BetaLaw& law, double s) {
  using boost::math::lgamma;
  return lgamma(law.a - s) + lgamma(law.b + s) - lgamma(law.a) - lgamma(law.b);
}

void check_moment(const EnvSpec& spec, double s) {
  if (const auto* beta = std::get_if<BetaLaw>(&spec.law())) {
    if (!(s < beta->a) || !(s > -beta->b)) {
      throw Error(ErrorKind::MomentDiverges,
                  "E A^s diverges for s = " + std::to_string(s) + " (domain (" +
                      std::to_string(-beta->b) + ", " + std::to_string(beta->a) + "))");
    }
  }
}

double draw_gamma(double shape, RngStream& rng) {
  std::gamma_distribution<double> g(shape, 1.0);
  double v = g(rng);
  while (v <= 0.0) v = g(rng);
  return v;
}

// Rational approximation p/q of r with q <= max_den, by continued fractions.
bool is_rational(double r, long max_den, double tol) {
  double x = std::abs(r);
  long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(x);
    const long ai = static_cast<long>(a);
    const long h2 = ai * h1 + h0;
    const long k2 = ai * k1 + k0;
    if (k2 > max_den) return false;
    if (std::abs(std::abs(r) - static_cast<double>(h2) / static_cast<double>(k2)) <=
        tol * std::max(1.0, std::abs(r))) {
      return true;
    }
    const double frac = x - a;
    if (frac < 1e-15) return true;
    x = 1.0 / frac;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
  }
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// EnvSpec

EnvSpec::EnvSpec(Variant law) : law_(std::move(law)) {}

EnvSpec EnvSpec::two_point(double a1, double a2, double p) {
  if (!(a1 > 0.0) || !(a2 > 0.0) || !std::isfinite(a1) || !std::isfinite(a2)) {
    throw Error(ErrorKind::InvalidSpec, "two_point atoms must be positive and finite");
  }
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::InvalidSpec, "two_point p must lie in (0, 1)");
  EnvSpec spec(TwoPointLaw{a1, a2, p});
  spec.atoms_ = {a1, a2};
  spec.probs_ = {p, 1.0 - p};
  return spec;
}

EnvSpec EnvSpec::discrete(std::vector<double> atoms, std::vector<double> probs) {
  if (atoms.empty() || atoms.size() != probs.size()) {
    throw Error(ErrorKind::InvalidSpec, "discrete law needs matching nonempty atoms/probs");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (!(atoms[i] > 0.0) || !std::isfinite(atoms[i])) {
      throw Error(ErrorKind::InvalidSpec, "discrete atoms must be positive and finite");
    }
    if (!(probs[i] >= 0.0)) throw Error(ErrorKind::InvalidSpec, "discrete probabilities must be >= 0");
    total += probs[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorKind::InvalidSpec, "discrete probabilities must sum to 1 within 1e-12");
  }
  EnvSpec spec(DiscreteLaw{atoms, probs});
  spec.atoms_ = std::move(atoms);
  spec.probs_ = std::move(probs);
  return spec;
}

EnvSpec EnvSpec::beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw Error(ErrorKind::InvalidSpec, "beta shapes must be positive and finite");
  }
  return EnvSpec(BetaLaw{a, b});
}

EnvSpec EnvSpec::deterministic(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw Error(ErrorKind::InvalidSpec, "deterministic atom must be positive and finite");
  }
  EnvSpec spec(DeterministicLaw{a});
  spec.atoms_ = {a};
  spec.probs_ = {1.0};
  return spec;
}

EnvSpec& EnvSpec::require_transient() {
  const double m = mean_log_A(*this);
  if (!(m < 0.0)) {
    throw Error(ErrorKind::NotTransient, "E log A = " + std::to_string(m) + " is not negative");
  }
  return *this;
}

double EnvSpec::alpha_inf() const noexcept {
  if (const auto* beta = std::get_if<BetaLaw>(&law_)) return beta->a;
  return kInfinity;
}

std::string EnvSpec::family() const {
  return std::visit(overloaded{[](const TwoPointLaw&) { return std::string("two_point"); },
                               [](const DiscreteLaw&) { return std::string("discrete"); },
                               [](const BetaLaw&) { return std::string("beta"); },
                               [](const DeterministicLaw&) { return std::string("deterministic"); }},
                    law_);
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Ballistic: return "ballistic";
    case Regime::SubBallistic: return "sub-ballistic";
    case Regime::Boundary: return "boundary";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Cumulants

double lambda(const EnvSpec& spec, double s) {
  check_moment(spec, s);
  if (const auto* beta = std::get_if<BetaLaw>(&spec.law())) return std::exp(log_beta_ratio(*beta, s));
  double sum = 0.0;
  for (std::size_t i = 0; i < spec.atoms().size(); ++i) sum += spec.probs()[i] * std::pow(spec.atoms()[i], s);
  return sum;
}

double lambda_quadrature(const EnvSpec& spec, double s) {
  const auto* beta = std::get_if<BetaLaw>(&spec.law());
  if (beta == nullptr) return lambda(spec, s);
  check_moment(spec, s);
  // E A^s = int_0^1 w^(a-s-1) (1-w)^(b+s-1) dw / B(a, b); the exponents may
  // be negative, which tanh-sinh absorbs at the endpoints. The second
  // argument is the signed distance to the nearer endpoint.
  const double p = beta->a - s - 1.0;
  const double q = beta->b + s - 1.0;
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double integral = integrator.integrate(
      [p, q](double w, double wc) {
        const double left = wc < 0.0 ? -wc : w;
        const double right = wc > 0.0 ? wc : 1.0 - w;
        return std::exp(p * std::log(left) + q * std::log(right));
      },
      0.0, 1.0, 1e-13);
  using boost::math::lgamma;
  const double log_b = lgamma(beta->a) + lgamma(beta->b) - lgamma(beta->a + beta->b);
  return integral / std::exp(log_b);
}

double log_cumulant(const EnvSpec& spec, double s) {
  check_moment(spec, s);
  if (const auto* beta = std::get_if<BetaLaw>(&spec.law())) return log_beta_ratio(*beta, s);
  return std::log(lambda(spec, s));
}

double lambda_prime(const EnvSpec& spec, double s) {
  check_moment(spec, s);
  if (const auto* beta = std::get_if<BetaLaw>(&spec.law())) {
    return boost::math::digamma(beta->b + s) - boost::math::digamma(beta->a - s);
  }
  // Ratio of weighted sums; scale by the largest term to avoid overflow.
  const auto atoms = spec.atoms();
  const auto probs = spec.probs();
  double max_log = -kInfinity;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (probs[i] > 0.0) max_log = std::max(max_log, s * std::log(atoms[i]));
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    const double w = probs[i] * std::exp(s * std::log(atoms[i]) - max_log);
    num += w * std::log(atoms[i]);
    den += w;
  }
  return num / den;
}

double lambda_prime_numeric(const EnvSpec& spec, double s) {
  const double h = 1e-6 * std::max(1.0, std::abs(s));
  return (log_cumulant(spec, s + h) - log_cumulant(spec, s - h)) / (2.0 * h);
}

double mean_log_A(const EnvSpec& spec) { return lambda_prime(spec, 0.0); }

double prob_A_greater_one(const EnvSpec& spec) {
  if (const auto* beta = std::get_if<BetaLaw>(&spec.law())) {
    return boost::math::ibeta(beta->a, beta->b, 0.5);  // P(w < 1/2)
  }
  double p = 0.0;
  for (std::size_t i = 0; i < spec.atoms().size(); ++i) {
    if (spec.atoms()[i] > 1.0) p += spec.probs()[i];
  }
  return p;
}

double mean_omega(const EnvSpec& spec) {
  if (const auto* beta = std::get_if<BetaLaw>(&spec.law())) return beta->a / (beta->a + beta->b);
  double m = 0.0;
  for (std::size_t i = 0; i < spec.atoms().size(); ++i) m += spec.probs()[i] / (1.0 + spec.atoms()[i]);
  return m;
}

double solve_alpha(const EnvSpec& spec) {
  if (!(mean_log_A(spec) < 0.0)) throw Error(ErrorKind::NotTransient, "E log A >= 0");
  if (!(prob_A_greater_one(spec) > 0.0)) throw Error(ErrorKind::NoPositiveRoot, "P(A > 1) = 0");

  const double edge = spec.alpha_inf();
  double lo = 0.0;
  double hi = 1e-3;
  bool bracketed = false;
  for (int it = 0; it < 4000; ++it) {
    if (hi >= edge) hi = lo + 0.5 * (edge - lo);
    if (log_cumulant(spec, hi) > 0.0) {
      bracketed = true;
      break;
    }
    lo = hi;
    hi *= 2.0;
  }
  if (!bracketed) throw Error(ErrorKind::NoPositiveRoot, "lambda stays below 1 on its domain");
  for (int it = 0; it < 400 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (log_cumulant(spec, mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

double rho_inf(const EnvSpec& spec) {
  if (spec.is_beta()) return kInfinity;
  double top = -kInfinity;
  for (std::size_t i = 0; i < spec.atoms().size(); ++i) {
    if (spec.probs()[i] > 0.0) top = std::max(top, std::log(spec.atoms()[i]));
  }
  return top;
}

double tilt_for_level(const EnvSpec& spec, double rho) {
  const double base = mean_log_A(spec);
  const double top = rho_inf(spec);
  if (std::abs(rho - base) <= 1e-12 * std::max(1.0, std::abs(base))) return 0.0;
  if (!(rho > base) || !(rho < top)) {
    throw Error(ErrorKind::OutOfDomain, "rho = " + std::to_string(rho) + " outside (E log A, rho_inf) = (" +
                                            std::to_string(base) + ", " + std::to_string(top) + ")");
  }
  const double edge = spec.alpha_inf();
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0;; ++it) {
    if (it > 4000) throw Error(ErrorKind::OutOfDomain, "no tilt reaches rho = " + std::to_string(rho));
    if (hi >= edge) hi = lo + 0.5 * (edge - lo);
    if (lambda_prime(spec, hi) >= rho) break;
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 400 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (lambda_prime(spec, mid) >= rho ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

double legendre(const EnvSpec& spec, double rho) {
  const double s = tilt_for_level(spec, rho);
  if (s == 0.0) return 0.0;
  return s * rho - log_cumulant(spec, s);
}

bool is_arithmetic(const EnvSpec& spec) {
  if (spec.is_beta()) return false;
  std::vector<double> logs;
  for (std::size_t i = 0; i < spec.atoms().size(); ++i) {
    if (spec.probs()[i] <= 0.0) continue;
    const double l = std::log(spec.atoms()[i]);
    if (std::abs(l) > 1e-15) logs.push_back(l);
  }
  for (std::size_t i = 1; i < logs.size(); ++i) {
    if (!is_rational(logs[i] / logs[0], 10000, 1e-11)) return false;
  }
  return true;
}

CumulantProfile profile(const EnvSpec& spec) {
  CumulantProfile p;
  p.alpha = solve_alpha(spec);
  p.rho0 = lambda_prime(spec, p.alpha);
  p.mean_logA = mean_log_A(spec);
  p.alpha_inf = spec.alpha_inf();
  p.mean_A = p.alpha_inf > 1.0 ? lambda(spec, 1.0) : kInfinity;
  if (std::abs(p.mean_A - 1.0) <= 1e-12) {
    p.regime = Regime::Boundary;
    p.speed_v = 0.0;
  } else if (p.mean_A < 1.0) {
    p.regime = Regime::Ballistic;
    p.speed_v = (1.0 - p.mean_A) / (1.0 + p.mean_A);
  } else {
    p.regime = Regime::SubBallistic;
    p.speed_v = 0.0;
  }
  p.rho_inf = rho_inf(spec);
  p.arithmetic_flag = is_arithmetic(spec);
  return p;
}

// ---------------------------------------------------------------------------
// Deviation window

DeviationWindow window_bounds(double rho0, double x, double delta) {
  if (!(x > std::exp(1.0))) throw Error(ErrorKind::OutOfDomain, "deviation window needs x > e");
  if (!(delta > 0.0 && delta < 0.5)) throw Error(ErrorKind::OutOfDomain, "deviation window needs 0 < delta < 1/2");
  if (!(rho0 > 0.0)) throw Error(ErrorKind::OutOfDomain, "deviation window needs rho0 > 0");
  const double lx = std::log(x);
  DeviationWindow w;
  // The guard absorbs the rounding of log(exp(k)).
  w.n0 = static_cast<std::int64_t>(std::floor(lx / rho0 + 1e-9));
  w.m = static_cast<std::int64_t>(std::floor(std::pow(lx, 0.5 + delta) + 1e-9));
  w.n1 = w.n0 - w.m;
  w.n2 = w.n0 + w.m;
  if (w.n1 < 1) {
    w.n1 = 1;
    w.clamped = true;
  }
  return w;
}

DeviationWindow deviation_window(const CumulantProfile& profile, double x, double delta) {
  DeviationWindow w = window_bounds(profile.rho0, x, delta);
  if (w.clamped) {
    throw Error(ErrorKind::WindowDegenerate, "n0 - m = " + std::to_string(w.n0 - w.m) +
                                                 " <= 0; x = " + std::to_string(x) + " is too small");
  }
  return w;
}

// ---------------------------------------------------------------------------
// Sampling

double draw_A(const EnvSpec& spec, RngStream& rng) {
  if (const auto* beta = std::get_if<BetaLaw>(&spec.law())) {
    const double x = draw_gamma(beta->a, rng);
    const double y = draw_gamma(beta->b, rng);
    return y / x;
  }
  const auto atoms = spec.atoms();
  if (atoms.size() == 1) return atoms[0];
  const auto probs = spec.probs();
  double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
    if (u < probs[i]) return atoms[i];
    u -= probs[i];
  }
  return atoms.back();
}

double draw_omega(const EnvSpec& spec, RngStream& rng) {
  if (const auto* beta = std::get_if<BetaLaw>(&spec.law())) {
    const double x = draw_gamma(beta->a, rng);
    const double y = draw_gamma(beta->b, rng);
    return x / (x + y);
  }
  return 1.0 / (1.0 + draw_A(spec, rng));
}

std::vector<double> sample_A(const EnvSpec& spec, RngStream& rng, std::size_t count) {
  std::vector<double> out(count);
  for (auto& a : out) a = draw_A(spec, rng);
  return out;
}

TiltedSampler::TiltedSampler(const EnvSpec& spec, double s) : spec_(spec), s_(s) {
  if (const auto* beta = std::get_if<BetaLaw>(&spec.law())) {
    if (!(s < beta->a) || !(s > -beta->b)) {
      throw Error(ErrorKind::TiltUnavailable, "Beta tilt needs -b < s < a");
    }
    spec_ = EnvSpec::beta(beta->a - s, beta->b + s);
    log_norm_ = log_cumulant(spec, s);
    return;
  }
  log_norm_ = log_cumulant(spec, s);
  const auto atoms = spec.atoms();
  const auto probs = spec.probs();
  cdf_weights_.resize(atoms.size());
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    cdf_weights_[i] = probs[i] * std::exp(s * std::log(atoms[i]) - log_norm_);
  }
  cdf_.resize(atoms.size());
  std::partial_sum(cdf_weights_.begin(), cdf_weights_.end(), cdf_.begin());
  for (auto& c : cdf_) c /= cdf_.back();
}

double TiltedSampler::draw(RngStream& rng) const {
  if (spec_.is_beta()) return draw_A(spec_, rng);
  const auto atoms = spec_.atoms();
  if (atoms.size() == 1) return atoms[0];
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), atoms.size() - 1);
  return atoms[idx];
}

}  // namespace rwre
