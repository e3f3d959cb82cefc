#include "rwre/walk.hpp"

#include <algorithm>
#include <string>

#include "rwre/errors.hpp"

namespace rwre {

QuenchedEnv::QuenchedEnv(EnvSpec spec, const RngStream& stream)
    : spec_(std::move(spec)), right_rng_(stream.split(0)), left_rng_(stream.split(1)) {}

void QuenchedEnv::reset(const RngStream& stream) {
  right_rng_ = stream.split(0);
  left_rng_ = stream.split(1);
  right_.clear();
  left_.clear();
}

double QuenchedEnv::grow_right(std::size_t i) {
  while (right_.size() <= i) right_.push_back(draw_omega(spec_, right_rng_));
  return right_[i];
}

double QuenchedEnv::grow_left(std::size_t i) {
  while (left_.size() <= i) left_.push_back(draw_omega(spec_, left_rng_));
  return left_[i];
}

std::int64_t HitRecord::sum_U() const noexcept {
  std::int64_t total = 0;
  for (const auto& [site, count] : U) total += count;
  return total;
}

HitRecord run_until_hit(QuenchedEnv& env, std::int64_t n, RngStream& rng, std::int64_t step_cap) {
  if (n < 1) throw Error(ErrorKind::OutOfDomain, "run_until_hit needs n >= 1");
  // Counters for sites 0..n-1 and -1, -2, ...
  std::vector<std::int64_t> right(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> left;

  HitRecord rec;
  rec.n = n;
  std::int64_t x = 0;
  std::int64_t steps = 0;
  std::int64_t lefts = 0;
  std::int64_t min_site = 0;
  while (x != n) {
    if (steps >= step_cap) {
      throw Error(ErrorKind::HorizonExceeded,
                  "walk did not reach " + std::to_string(n) + " within " + std::to_string(step_cap) + " steps");
    }
    ++steps;
    if (rng.uniform() < env.omega(x)) {
      ++x;
    } else {
      if (x >= 0) {
        ++right[static_cast<std::size_t>(x)];
      } else {
        const auto i = static_cast<std::size_t>(-(x + 1));
        if (left.size() <= i) left.resize(i + 1, 0);
        ++left[i];
      }
      ++lefts;
      --x;
      min_site = std::min(min_site, x);
    }
  }
  rec.T = steps;
  rec.steps_left_total = lefts;
  rec.min_site = min_site;
  for (std::size_t i = left.size(); i-- > 0;) {
    if (left[i] > 0) rec.U.emplace_back(-static_cast<std::int64_t>(i) - 1, left[i]);
  }
  for (std::size_t i = 0; i < right.size(); ++i) {
    if (right[i] > 0) rec.U.emplace_back(static_cast<std::int64_t>(i), right[i]);
  }
  return rec;
}

std::int64_t position_after(QuenchedEnv& env, std::int64_t steps, RngStream& rng) {
  std::int64_t x = 0;
  for (std::int64_t k = 0; k < steps; ++k) {
    x += rng.uniform() < env.omega(x) ? 1 : -1;
  }
  return x;
}

ExcursionStat longest_excursion(QuenchedEnv& env, std::int64_t j, std::int64_t horizon, RngStream& rng,
                                std::int64_t step_cap) {
  if (j < 1) throw Error(ErrorKind::OutOfDomain, "longest_excursion needs j >= 1");
  std::int64_t x = 0;
  std::int64_t steps = 0;
  std::int64_t min_site = 0;
  while (x != j) {
    if (steps >= step_cap) {
      throw Error(ErrorKind::HorizonExceeded, "walk did not reach " + std::to_string(j));
    }
    ++steps;
    x += rng.uniform() < env.omega(x) ? 1 : -1;
    min_site = std::min(min_site, x);
  }
  ExcursionStat stat;
  stat.j = j;
  stat.horizon = horizon;
  std::int64_t lowest = j;
  for (std::int64_t k = 0; k < horizon; ++k) {
    x += rng.uniform() < env.omega(x) ? 1 : -1;
    lowest = std::min(lowest, x);
  }
  stat.L = j - lowest;
  stat.min_site = std::min(min_site, lowest);
  return stat;
}

}  // namespace rwre
