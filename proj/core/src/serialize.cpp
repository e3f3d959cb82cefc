#include "rwre/serialize.hpp"

#include <cmath>

#include "rwre/errors.hpp"

namespace rwre {

namespace {

double number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw Error(ErrorKind::InvalidSpec, std::string("env: missing numeric field '") + key + "'");
  }
  return j.at(key).get<double>();
}

std::vector<double> numbers(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw Error(ErrorKind::InvalidSpec, std::string("env: missing array field '") + key + "'");
  }
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) throw Error(ErrorKind::InvalidSpec, std::string("env: non-numeric entry in '") + key + "'");
    out.push_back(v.get<double>());
  }
  return out;
}

// JSON has no infinity; unbounded values are written as null.
nlohmann::json extended(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

}  // namespace

EnvSpec env_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j.at("family").is_string()) {
    throw Error(ErrorKind::InvalidSpec, "env: expected an object with a string 'family'");
  }
  const auto family = j.at("family").get<std::string>();
  if (family == "beta") return EnvSpec::beta(number(j, "a"), number(j, "b"));
  if (family == "two_point") return EnvSpec::two_point(number(j, "a1"), number(j, "a2"), number(j, "p"));
  if (family == "discrete") return EnvSpec::discrete(numbers(j, "atoms"), numbers(j, "probs"));
  if (family == "deterministic") return EnvSpec::deterministic(number(j, "a"));
  throw Error(ErrorKind::InvalidSpec, "env: unknown family '" + family + "'");
}

nlohmann::json to_json(const EnvSpec& spec) {
  return std::visit(
      [](const auto& law) -> nlohmann::json {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, BetaLaw>) {
          return {{"family", "beta"}, {"a", law.a}, {"b", law.b}};
        } else if constexpr (std::is_same_v<T, TwoPointLaw>) {
          return {{"family", "two_point"}, {"a1", law.a1}, {"a2", law.a2}, {"p", law.p}};
        } else if constexpr (std::is_same_v<T, DiscreteLaw>) {
          return {{"family", "discrete"}, {"atoms", law.atoms}, {"probs", law.probs}};
        } else {
          return {{"family", "deterministic"}, {"a", law.a}};
        }
      },
      spec.law());
}

nlohmann::json to_json(const CumulantProfile& p) {
  return {{"alpha", p.alpha},
          {"rho0", p.rho0},
          {"mean_A", extended(p.mean_A)},
          {"mean_logA", p.mean_logA},
          {"speed_v", p.speed_v},
          {"regime", to_string(p.regime)},
          {"alpha_inf", extended(p.alpha_inf)},
          {"rho_inf", extended(p.rho_inf)},
          {"arithmetic_flag", p.arithmetic_flag}};
}

nlohmann::json to_json(const DeviationWindow& w) {
  return {{"n0", w.n0}, {"m", w.m}, {"n1", w.n1}, {"n2", w.n2}, {"clamped", w.clamped}};
}

nlohmann::json to_json(const HitRecord& r) {
  nlohmann::json u = nlohmann::json::array();
  for (const auto& [site, count] : r.U) u.push_back({site, count});
  return {{"n", r.n}, {"T_n", r.T}, {"U", u}};
}

nlohmann::json to_json(const RegenSample& s) {
  return {{"nu", s.nu}, {"cycle_sums", s.cycle_sums}, {"cycle_peaks", s.cycle_peaks}};
}

nlohmann::json to_json(const BlockDecomposition& b) {
  return {{"x", b.x},         {"n", b.n},         {"window", to_json(b.window)}, {"p", b.p},
          {"W_total", b.W_total}, {"W0", b.W0}, {"Wdown", b.Wdown}, {"Wup", b.Wup},
          {"blocks", b.blocks}};
}

}  // namespace rwre
