#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rwre/constants.hpp"
#include "rwre/errors.hpp"
#include "rwre/harness.hpp"
#include "rwre/serialize.hpp"

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> replicas;
  std::string out;
  std::optional<unsigned> workers;
  std::string constants_out;
};

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rwre::Error(rwre::ErrorKind::ConfigError, "cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw rwre::Error(rwre::ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
}

// Writes to `path`, or to stdout when it is empty.
template <class Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw rwre::Error(rwre::ErrorKind::ConfigError, "cannot write '" + path + "'");
  write(out);
}

int run(const std::string& command, const Options& opt) {
  nlohmann::json doc = load_config(opt.config_path);
  if (command == "analyze-env") {
    if (!doc.contains("env")) throw rwre::Error(rwre::ErrorKind::ConfigError, "config needs an 'env' object");
    const auto spec = rwre::env_from_json(doc.at("env"));
    emit(opt.out, [&](std::ostream& os) { os << rwre::analyze_env(spec).dump(2) << '\n'; });
    return 0;
  }
  doc["experiment"] = command;
  rwre::ExperimentConfig cfg = rwre::config_from_json(doc);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.replicas) cfg.replicas = *opt.replicas;
  if (opt.workers) cfg.workers = *opt.workers;
  if (!opt.out.empty()) cfg.output = opt.out;
  if (!opt.constants_out.empty()) cfg.constants_out = opt.constants_out;
  if (cfg.replicas == 0) throw rwre::Error(rwre::ErrorKind::ConfigError, "replicas must be positive");
  if (cfg.workers == 0) throw rwre::Error(rwre::ErrorKind::ConfigError, "workers must be positive");

  const rwre::ExperimentReport report = rwre::run_experiment(cfg);
  emit(cfg.output, [&](std::ostream& os) { rwre::write_report_csv(os, report); });
  if (cfg.constants_out && !report.constants.empty()) {
    emit(*cfg.constants_out, [&](std::ostream& os) { rwre::write_constants_csv(os, report.constants); });
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random walk in random environment: simulation and verification experiments"};
  app.require_subcommand(1);
  Options opt;

  const char* commands[][2] = {
      {"analyze-env", "Print the cumulant profile of the configured environment as JSON"},
      {"identities", "Check the exact pathwise identities and the distributional equalities"},
      {"constants", "Estimate E nu, C2, C3, C1 and C(alpha)"},
      {"thm-main1", "Ballistic deviations P(X_n - vn < -x)"},
      {"thm-main2", "Sub-ballistic slowdown P(X_n < x)"},
      {"thm-wn", "Total progeny deviations P(W_n - d_n > x)"},
      {"bahadur-rao", "Precise product deviations under exponential tilting"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config_path, "JSON config with an 'env' object")->required();
    sub->add_option("--out", opt.out, "Output path (stdout if omitted)");
    if (std::string(name) == "analyze-env") continue;
    sub->add_option("--seed", opt.seed, "Base seed");
    sub->add_option("--replicas", opt.replicas, "Replicas per cell");
    sub->add_option("--workers", opt.workers, "Worker threads");
    if (std::string(name) == "constants") {
      sub->add_option("--constants-out", opt.constants_out, "Also write the constants table to this CSV");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return run(app.get_subcommands().front()->get_name(), opt);
  } catch (const rwre::Error& e) {
    std::cerr << "rwre: " << rwre::to_string(e.kind()) << ": " << e.what() << '\n';
    return rwre::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "rwre: " << e.what() << '\n';
    return 4;
  }
}
