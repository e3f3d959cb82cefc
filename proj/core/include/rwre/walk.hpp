#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rwre/env_model.hpp"
#include "rwre/rng.hpp"

namespace rwre {

inline constexpr std::int64_t kDefaultStepCap = 1'000'000'000;

/// Quenched environment on Z, realized lazily as the walk explores it.
///
/// Sites 0, 1, 2, ... are drawn in order from one child stream and sites
/// -1, -2, ... from another, so the value of w_i depends only on the stream
/// and i, never on the order in which the walk discovers sites. Once a site
/// is realized it is never resampled.
class QuenchedEnv {
 public:
  QuenchedEnv(EnvSpec spec, const RngStream& stream);

  /// Fresh environment from a new stream; keeps allocated capacity.
  void reset(const RngStream& stream);

  double omega(std::int64_t site) {
    if (site >= 0) {
      const auto i = static_cast<std::size_t>(site);
      return i < right_.size() ? right_[i] : grow_right(i);
    }
    const auto i = static_cast<std::size_t>(-(site + 1));
    return i < left_.size() ? left_[i] : grow_left(i);
  }

  /// Realized range [lo, hi].
  std::int64_t lo() const noexcept { return -static_cast<std::int64_t>(left_.size()); }
  std::int64_t hi() const noexcept { return static_cast<std::int64_t>(right_.size()) - 1; }

  const EnvSpec& spec() const noexcept { return spec_; }

 private:
  double grow_right(std::size_t i);
  double grow_left(std::size_t i);

  EnvSpec spec_;
  RngStream right_rng_;
  RngStream left_rng_;
  std::vector<double> right_;
  std::vector<double> left_;
};

/// One run of the walk from 0 until its first visit to n.
struct HitRecord {
  std::int64_t n = 0;
  std::int64_t T = 0;  // hitting time T_n
  /// (site, U_i^n) for every site i < n with U_i^n > 0, ascending by site;
  /// U_i^n counts the jumps i -> i-1 before T_n.
  std::vector<std::pair<std::int64_t, std::int64_t>> U;
  std::int64_t min_site = 0;
  std::int64_t steps_left_total = 0;

  std::int64_t sum_U() const noexcept;
};

struct ExcursionStat {
  std::int64_t j = 0;
  std::int64_t L = 0;  // max depth below j after T_j within the horizon
  std::int64_t horizon = 0;
  std::int64_t min_site = 0;
};

/// Simulates X from 0 until T_n, keeping only per-site counters.
/// Throws HorizonExceeded once the step count passes `step_cap`.
HitRecord run_until_hit(QuenchedEnv& env, std::int64_t n, RngStream& rng,
                        std::int64_t step_cap = kDefaultStepCap);

/// X after `steps` steps from X_0 = 0.
std::int64_t position_after(QuenchedEnv& env, std::int64_t steps, RngStream& rng);

/// Runs to T_j, then `horizon` more steps, tracking max_i (j - X_i).
ExcursionStat longest_excursion(QuenchedEnv& env, std::int64_t j, std::int64_t horizon, RngStream& rng,
                                std::int64_t step_cap = kDefaultStepCap);

}  // namespace rwre
