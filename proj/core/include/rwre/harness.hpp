#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwre/constants.hpp"
#include "rwre/env_model.hpp"
#include "rwre/parallel.hpp"

namespace rwre {

enum class Experiment { AnalyzeEnv, Identities, Constants, ThmMain1, ThmMain2, ThmWn, BahadurRao };
std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);

// How the deviation level x depends on n. Every entry of `values` is one
// curve: epsilon for x = epsilon n, beta for x = n^beta, the fixed x itself,
// or the multiple of the lower window endpoint for window_interior.
struct XRule {
  enum class Kind { Fixed, Epsilon, NBeta, WindowInterior };
  Kind kind = Kind::Fixed;
  std::vector<double> values;
};

// Sequences left free by the windows: c_n = c_scale log n, b_n = b_fraction v n,
// s_n = s_scale n / log n, and the log-power M.
struct WindowParams {
  double M = 3.0;
  double c_scale = 1.0;
  double b_fraction = 0.5;
  double s_scale = 1.0;
};

struct ExperimentConfig {
  EnvSpec env = EnvSpec::beta(3.0, 1.0);
  std::uint64_t seed = 1;
  std::uint64_t replicas = 10000;
  Experiment experiment = Experiment::Identities;
  std::vector<std::int64_t> n_grid;
  std::optional<XRule> x_rule;
  double delta = 0.1;
  std::string output;
  unsigned workers = 1;
  WindowParams window;

  std::vector<double> rho_grid;                // bahadur-rao
  std::optional<std::uint64_t> plain_replicas;  // bahadur-rao cross-check
  std::vector<double> x_grid;                  // constants, tail plateau
  std::vector<double> t_grid;                  // constants, first passage
  double hill_fraction = 0.001;
  std::optional<std::string> constants_out;
  std::optional<TailEstimate> reference;  // C(alpha) or C1 the ratios are compared with
  bool refuse_low_probability = true;
};

/// Parses a config document. Unknown experiment names, non-increasing grids
/// and wrongly typed fields raise ConfigError; a bad env raises InvalidSpec.
ExperimentConfig config_from_json(const nlohmann::json& j);

struct ReportRow {
  std::string experiment;
  std::int64_t n = 0;
  double x = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  double normalizer = 1.0;
  double ratio = 0.0;  // estimate / normalizer
  double ratio_se = 0.0;
  std::uint64_t replicas = 0;
  std::vector<std::string> flags;

  bool has_flag(const std::string& flag) const;
};

struct ExperimentReport {
  Experiment experiment = Experiment::Identities;
  std::vector<ReportRow> rows;     // per-cell results
  std::vector<ReportRow> summary;  // slopes, flatness, pass/fail lines
  std::vector<TailEstimate> constants;

  const ReportRow* find_summary(const std::string& flag) const;
};

ExperimentReport run_identities(const ExperimentConfig& config);
ExperimentReport run_constants(const ExperimentConfig& config);
ExperimentReport run_thm_main1(const ExperimentConfig& config);
ExperimentReport run_thm_main2(const ExperimentConfig& config);
ExperimentReport run_thm_wn(const ExperimentConfig& config);
ExperimentReport run_bahadur_rao(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Profile, tail window endpoints and closed-form constants of the env.
nlohmann::json analyze_env(const EnvSpec& spec);

/// CSV: experiment,n,x,estimate,se,normalizer,ratio,ratio_se,replicas,flags
/// Cell rows come first, then summary rows. Formatting is locale-free and
/// independent of the worker count.
void write_report_csv(std::ostream& os, const ExperimentReport& report);

}  // namespace rwre
