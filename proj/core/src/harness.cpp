#include "rwre/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <locale>
#include <ostream>
#include <sstream>

#include "rwre/branching.hpp"
#include "rwre/errors.hpp"
#include "rwre/perpetuity.hpp"
#include "rwre/serialize.hpp"
#include "rwre/stats.hpp"
#include "rwre/walk.hpp"

namespace rwre {

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::AnalyzeEnv: return "analyze-env";
    case Experiment::Identities: return "identities";
    case Experiment::Constants: return "constants";
    case Experiment::ThmMain1: return "thm-main1";
    case Experiment::ThmMain2: return "thm-main2";
    case Experiment::ThmWn: return "thm-wn";
    case Experiment::BahadurRao: return "bahadur-rao";
  }
  return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
  for (auto e : {Experiment::AnalyzeEnv, Experiment::Identities, Experiment::Constants, Experiment::ThmMain1,
                 Experiment::ThmMain2, Experiment::ThmWn, Experiment::BahadurRao}) {
    if (to_string(e) == name) return e;
  }
  throw Error(ErrorKind::ConfigError, "unknown experiment '" + name + "'");
}

bool ReportRow::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

const ReportRow* ExperimentReport::find_summary(const std::string& flag) const {
  for (const auto& row : summary) {
    if (row.has_flag(flag)) return &row;
  }
  return nullptr;
}

// ---------------------------------------------------------------- config

namespace {

using nlohmann::json;

template <class T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("config field '") + key + "': " + e.what());
  }
}

template <class T>
void require_increasing(const std::vector<T>& grid, const char* name) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw Error(ErrorKind::ConfigError, std::string(name) + " must be increasing");
  }
}

XRule::Kind x_kind(const std::string& s) {
  if (s == "fixed") return XRule::Kind::Fixed;
  if (s == "epsilon") return XRule::Kind::Epsilon;
  if (s == "n_beta") return XRule::Kind::NBeta;
  if (s == "window_interior") return XRule::Kind::WindowInterior;
  throw Error(ErrorKind::ConfigError, "unknown x_rule kind '" + s + "'");
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
  ExperimentConfig c;
  if (!j.contains("env")) throw Error(ErrorKind::ConfigError, "config needs an 'env' object");
  c.env = env_from_json(j.at("env"));
  c.seed = field<std::uint64_t>(j, "seed", c.seed);
  c.replicas = field<std::uint64_t>(j, "replicas", c.replicas);
  if (j.contains("experiment")) c.experiment = experiment_from_string(field<std::string>(j, "experiment", ""));
  c.n_grid = field<std::vector<std::int64_t>>(j, "n_grid", {});
  if (j.contains("x_rule")) {
    const json& xr = j.at("x_rule");
    XRule rule;
    rule.kind = x_kind(field<std::string>(xr, "kind", "fixed"));
    if (xr.contains("value")) rule.values.push_back(field<double>(xr, "value", 0.0));
    const auto more = field<std::vector<double>>(xr, "values", {});
    rule.values.insert(rule.values.end(), more.begin(), more.end());
    if (rule.values.empty()) throw Error(ErrorKind::ConfigError, "x_rule needs 'value' or 'values'");
    c.x_rule = rule;
  }
  c.delta = field<double>(j, "delta", c.delta);
  c.output = field<std::string>(j, "output", "");
  c.workers = field<unsigned>(j, "workers", c.workers);
  if (j.contains("window")) {
    const json& w = j.at("window");
    c.window.M = field<double>(w, "M", c.window.M);
    c.window.c_scale = field<double>(w, "c_scale", c.window.c_scale);
    c.window.b_fraction = field<double>(w, "b_fraction", c.window.b_fraction);
    c.window.s_scale = field<double>(w, "s_scale", c.window.s_scale);
  }
  c.rho_grid = field<std::vector<double>>(j, "rho_grid", {});
  if (j.contains("plain_replicas")) c.plain_replicas = field<std::uint64_t>(j, "plain_replicas", 0);
  c.x_grid = field<std::vector<double>>(j, "x_grid", {});
  c.t_grid = field<std::vector<double>>(j, "t_grid", {});
  c.hill_fraction = field<double>(j, "hill_fraction", c.hill_fraction);
  if (j.contains("constants_out")) c.constants_out = field<std::string>(j, "constants_out", "");
  if (j.contains("reference")) {
    TailEstimate ref;
    ref.quantity = "reference";
    ref.method = TailMethod::Composed;
    ref.estimate = field<double>(j.at("reference"), "estimate", 0.0);
    ref.se = field<double>(j.at("reference"), "se", 0.0);
    c.reference = ref;
  }
  c.refuse_low_probability = field<bool>(j, "refuse_low_probability", true);

  if (c.replicas == 0) throw Error(ErrorKind::ConfigError, "replicas must be positive");
  if (!(c.delta > 0.0 && c.delta < 0.5)) throw Error(ErrorKind::ConfigError, "delta must lie in (0, 1/2)");
  for (auto n : c.n_grid) {
    if (n < 1) throw Error(ErrorKind::ConfigError, "n_grid entries must be positive");
  }
  require_increasing(c.n_grid, "n_grid");
  require_increasing(c.rho_grid, "rho_grid");
  require_increasing(c.x_grid, "x_grid");
  require_increasing(c.t_grid, "t_grid");
  if (c.x_rule) require_increasing(c.x_rule->values, "x_rule values");
  return c;
}

// ---------------------------------------------------------------- helpers

namespace {

constexpr std::uint64_t kMinHits = 100;

ReportRow make_row(Experiment e, std::int64_t n, double x, const McEstimate& est, double normalizer) {
  ReportRow row;
  row.experiment = to_string(e);
  row.n = n;
  row.x = x;
  row.estimate = est.value;
  row.se = est.se;
  row.normalizer = normalizer;
  row.ratio = est.value / normalizer;
  row.ratio_se = est.se / std::abs(normalizer);
  row.replicas = est.replicas;
  if (est.hits < kMinHits) row.flags.push_back("low-confidence");
  return row;
}

ReportRow summary_row(Experiment e, const std::string& name, double value, double se, double target, bool pass,
                      std::int64_t n = 0, double x = 0.0) {
  ReportRow row;
  row.experiment = to_string(e);
  row.n = n;
  row.x = x;
  row.estimate = value;
  row.se = se;
  row.normalizer = target;
  row.ratio = target != 0.0 ? value / target : 0.0;
  row.ratio_se = target != 0.0 ? se / std::abs(target) : 0.0;
  row.flags = {name, pass ? "pass" : "fail"};
  return row;
}

ReportRow refused_row(Experiment e, std::int64_t n, double x, double normalizer) {
  ReportRow row;
  row.experiment = to_string(e);
  row.n = n;
  row.x = x;
  row.normalizer = normalizer;
  row.flags = {"refused-low-probability"};
  return row;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(12) << v;
  return os.str();
}

void require_nonarithmetic(const CumulantProfile& prof) {
  if (prof.arithmetic_flag) {
    throw Error(ErrorKind::ArithmeticSpec, "log A is lattice-valued; precise-constant experiments need a nonarithmetic law");
  }
}

// Slope of log estimate against log n over rows with at least one hit. The
// standard error propagates the per-point Monte Carlo errors through the
// least-squares weights, which stays meaningful on a two-point grid.
std::optional<LinearFit> log_slope(const std::vector<const ReportRow*>& rows) {
  std::vector<double> lx, ly, rel;
  for (const auto* r : rows) {
    if (r->estimate > 0.0) {
      lx.push_back(std::log(static_cast<double>(r->n)));
      ly.push_back(std::log(r->estimate));
      rel.push_back(r->se / r->estimate);
    }
  }
  if (lx.size() < 2) return std::nullopt;
  LinearFit fit = ols(lx, ly);
  double mean_x = 0.0;
  for (double v : lx) mean_x += v;
  mean_x /= static_cast<double>(lx.size());
  double sxx = 0.0;
  for (double v : lx) sxx += (v - mean_x) * (v - mean_x);
  double var = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double w = (lx[i] - mean_x) / sxx;
    var += w * w * rel[i] * rel[i];
  }
  fit.slope_se = std::sqrt(var);
  return fit;
}

// max/min of the ratio over the top half of the rows (rows sorted by n).
double top_half_flatness(const std::vector<const ReportRow*>& rows) {
  if (rows.empty()) return kInfinity;
  const std::size_t start = rows.size() / 2;
  double lo = kInfinity, hi = 0.0;
  for (std::size_t i = start; i < rows.size(); ++i) {
    lo = std::min(lo, rows[i]->ratio);
    hi = std::max(hi, rows[i]->ratio);
  }
  return lo > 0.0 ? hi / lo : kInfinity;
}

void add_reference_comparison(ExperimentReport& report, const ExperimentConfig& cfg,
                              const std::vector<const ReportRow*>& rows, const std::string& label) {
  if (!cfg.reference || rows.empty()) return;
  const ReportRow& last = *rows.back();
  const double combined = std::hypot(last.ratio_se, cfg.reference->se);
  const double z = combined > 0.0 ? std::abs(last.ratio - cfg.reference->estimate) / combined : kInfinity;
  auto row = summary_row(report.experiment, "reference-z" + label, last.ratio, last.ratio_se,
                         cfg.reference->estimate, z <= 3.0, last.n, last.x);
  row.flags.push_back("z=" + fmt(z));
  report.summary.push_back(row);
}

std::vector<std::int64_t> n_grid_or(const ExperimentConfig& cfg, std::vector<std::int64_t> fallback) {
  return cfg.n_grid.empty() ? fallback : cfg.n_grid;
}

double low_probability_floor(const ExperimentConfig& cfg) {
  return cfg.refuse_low_probability ? 10.0 / static_cast<double>(cfg.replicas) : 0.0;
}

double heuristic_probability(const ExperimentConfig& cfg, double normalizer) {
  return normalizer * (cfg.reference ? cfg.reference->estimate : 1.0);
}

}  // namespace

// ---------------------------------------------------------------- identities

namespace {

struct IdentityOutcome {
  bool walk_capped = false;
  double T = 0.0;
  double sum_U = 0.0;
  bool hit_violation = false;
  double W = 0.0;
  bool partition_violation = false;
  bool block_violation = false;
  double W_block1 = 0.0;
  double W_block4 = 0.0;
  std::uint64_t lemma_violations = 0;
  double lemma_worst = 0.0;  // residual / (1 + |Zt_{k,n}|)
};

}  // namespace

ExperimentReport run_identities(const ExperimentConfig& cfg) {
  EnvSpec spec = cfg.env;
  spec.require_transient();
  const Experiment e = Experiment::Identities;
  const std::int64_t n = n_grid_or(cfg, {50}).front();
  const RngStream base(cfg.seed, 0);

  // Window for the block split. The partition identities hold for any window,
  // so a clamped one is used as is and flagged.
  std::optional<DeviationWindow> window;
  double x = 0.0;
  try {
    const CumulantProfile prof = profile(spec);
    if (cfg.x_rule && cfg.x_rule->kind == XRule::Kind::Fixed) {
      x = cfg.x_rule->values.front();
    } else {
      x = std::exp(std::max(prof.rho0 * static_cast<double>(n) / 5.0, 2.0));
    }
    window = window_bounds(prof.rho0, x, cfg.delta);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::NoPositiveRoot) throw;
  }
  const std::int64_t p = window ? n / window->n1 : 0;

  const auto outcomes = map_replicas<IdentityOutcome>(cfg.replicas, {cfg.workers}, [&](std::uint64_t i) {
    IdentityOutcome out;
    const RngStream r = base.split(i);
    QuenchedEnv env(spec, r.split(0));
    RngStream walk_rng = r.split(1);
    try {
      const HitRecord rec = run_until_hit(env, n, walk_rng);
      out.T = static_cast<double>(rec.T);
      out.sum_U = static_cast<double>(rec.sum_U());
      out.hit_violation = rec.T != n + 2 * rec.sum_U();
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::HorizonExceeded) throw;
      out.walk_capped = true;
    }
    RngStream w_rng = r.split(2);
    out.W = static_cast<double>(total_progeny_W(spec, n, w_rng));
    if (window) {
      RngStream b_rng = r.split(3);
      const BlockDecomposition blocks = decompose_blocks(spec, n, *window, b_rng);
      out.partition_violation = blocks.W0 + blocks.Wdown + blocks.Wup != blocks.W_total;
      std::int64_t block_sum = 0;
      for (auto b : blocks.blocks) block_sum += b;
      out.block_violation = block_sum != blocks.W0;
      if (blocks.blocks.size() >= 4) {
        out.W_block1 = static_cast<double>(blocks.blocks[0]);
        out.W_block4 = static_cast<double>(blocks.blocks[3]);
      }
    }
    RngStream z_rng = r.split(4);
    const BranchTrajectory traj = simulate_Z(spec, n, z_rng, {.track_lines = true, .track_quenched_means = true});
    for (std::int64_t k = 1; k < n; ++k) {
      const double rel = lemma2_residual(traj, k, n) / (1.0 + std::abs(line_one_partial_total(traj, k, n)));
      out.lemma_worst = std::max(out.lemma_worst, rel);
      if (rel > 1e-9) ++out.lemma_violations;
    }
    return out;
  });

  ExperimentReport report;
  report.experiment = e;
  const std::uint64_t R = cfg.replicas;
  std::uint64_t capped = 0, hit_bad = 0, part_bad = 0, block_bad = 0, lemma_bad = 0;
  double lemma_worst = 0.0;
  std::vector<double> T, twoW, sumU, W, b1, b4;
  MeanAccumulator w_acc, diff_acc_T, diff_acc_W;
  for (const auto& o : outcomes) {
    capped += o.walk_capped;
    hit_bad += o.hit_violation;
    part_bad += o.partition_violation;
    block_bad += o.block_violation;
    lemma_bad += o.lemma_violations;
    lemma_worst = std::max(lemma_worst, o.lemma_worst);
    if (!o.walk_capped) {
      T.push_back(o.T);
      sumU.push_back(o.sum_U);
      diff_acc_T.add(o.T);
    }
    W.push_back(o.W);
    twoW.push_back(2.0 * o.W + static_cast<double>(n));
    w_acc.add(o.W);
    diff_acc_W.add(2.0 * o.W + static_cast<double>(n));
    b1.push_back(o.W_block1);
    b4.push_back(o.W_block4);
  }

  auto exact_row = [&](const std::string& name, std::uint64_t violations, std::uint64_t checked, double xx) {
    ReportRow row;
    row.experiment = to_string(e);
    row.n = n;
    row.x = xx;
    row.estimate = static_cast<double>(violations);
    row.normalizer = static_cast<double>(checked);
    row.ratio = checked ? row.estimate / row.normalizer : 0.0;
    row.replicas = R;
    row.flags = {"identity=" + name, violations == 0 ? "pass" : "fail"};
    return row;
  };
  auto hit_row = exact_row("hitting-time", hit_bad, R - capped, 0.0);
  if (capped) hit_row.flags.push_back("capped=" + std::to_string(capped));
  report.rows.push_back(hit_row);
  if (window) {
    report.rows.push_back(exact_row("partition", part_bad, R, x));
    report.rows.push_back(exact_row("block-sum", block_bad, R, x));
    if (window->clamped) {
      report.rows[report.rows.size() - 2].flags.push_back("window-clamped");
      report.rows.back().flags.push_back("window-clamped");
    }
  }
  auto lemma_row = exact_row("lemma2", lemma_bad, R * static_cast<std::uint64_t>(n - 1), 0.0);
  lemma_row.flags.push_back("worst=" + fmt(lemma_worst));
  report.rows.push_back(lemma_row);

  auto ks_row = [&](const std::string& name, const std::vector<double>& a, const std::vector<double>& b) {
    const double D = ks_statistic(a, b);
    const double crit = ks_critical_value(0.001, a.size(), b.size());
    ReportRow row;
    row.experiment = to_string(e);
    row.n = n;
    row.estimate = D;
    row.normalizer = crit;
    row.ratio = D / crit;
    row.replicas = R;
    row.flags = {"ks=" + name, D < crit ? "pass" : "fail"};
    return row;
  };
  report.rows.push_back(ks_row("T_n-vs-2W_n+n", T, twoW));
  report.rows.push_back(ks_row("sumU-vs-W_n", sumU, W));

  const double rho = lambda(spec, 1.0);
  if (rho < 1.0) {
    const double target = static_cast<double>(n) * rho / (1.0 - rho);
    const bool ok = std::abs(w_acc.mean() - target) <= 3.0 * w_acc.se();
    ReportRow row = summary_row(e, "mean=W_n", w_acc.mean(), w_acc.se(), target, ok, n);
    row.replicas = R;
    report.rows.push_back(row);
    const double diff = diff_acc_T.mean() - diff_acc_W.mean();
    const double se = std::hypot(diff_acc_T.se(), diff_acc_W.se());
    ReportRow drow = summary_row(e, "mean-diff=T_n-vs-2W_n+n", diff, se, 1.0, std::abs(diff) <= 3.0 * se, n);
    drow.normalizer = 1.0;
    drow.replicas = R;
    report.rows.push_back(drow);
  }
  if (window && p >= 4 && R > 3) {
    const double corr = correlation(b1, b4);
    const double se = 1.0 / std::sqrt(static_cast<double>(R));
    ReportRow row = summary_row(e, "corr=block1-block4", corr, se, 1.0, std::abs(corr) <= 3.0 * se, n, x);
    row.replicas = R;
    report.rows.push_back(row);
  }
  const std::uint64_t exact_total = hit_bad + part_bad + block_bad + lemma_bad;
  report.summary.push_back(summary_row(e, "exact-violations", static_cast<double>(exact_total), 0.0, 1.0,
                                       exact_total == 0, n));
  return report;
}

// ---------------------------------------------------------------- constants

namespace {

ReportRow constant_row(const TailEstimate& t) {
  ReportRow row;
  row.experiment = to_string(Experiment::Constants);
  row.estimate = t.estimate;
  row.se = t.se;
  row.normalizer = 1.0;
  row.ratio = t.estimate;
  row.ratio_se = t.se;
  row.replicas = t.replicas;
  if (!t.grid.empty()) row.x = t.grid.back();
  row.flags = {"quantity=" + t.quantity, "method=" + to_string(t.method)};
  row.flags.insert(row.flags.end(), t.flags.begin(), t.flags.end());
  return row;
}

std::vector<double> geometric_grid(double lo, double hi, int points) {
  std::vector<double> g;
  for (int i = 0; i < points; ++i) {
    g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1)));
  }
  return g;
}

}  // namespace

ExperimentReport run_constants(const ExperimentConfig& cfg) {
  EnvSpec spec = cfg.env;
  spec.require_transient();
  const Experiment e = Experiment::Constants;
  const CumulantProfile prof = profile(spec);
  const RngStream base(cfg.seed, 0);
  const ExecPolicy policy{cfg.workers};
  const std::uint64_t R = cfg.replicas;
  const double alpha = prof.alpha;

  ExperimentReport report;
  report.experiment = e;

  TailEstimate Enu = estimate_Enu(spec, R, base.split(0), policy);

  TailEstimate C2;
  C2.quantity = "C2";
  if (auto closed = kesten_C2_closed_form(spec)) {
    C2.estimate = *closed;
    C2.method = TailMethod::Analytic;
  } else {
    const McEstimate mc = kesten_C2(spec, R, base.split(1), 1e-6, policy);
    C2.estimate = mc.value;
    C2.se = mc.se;
    C2.replicas = R;
    C2.method = TailMethod::Mean;
  }
  if (prof.arithmetic_flag) C2.flags.push_back("arithmetic");

  const std::vector<double> x_grid = cfg.x_grid.empty() ? geometric_grid(20.0, 200.0, 5) : cfg.x_grid;
  const std::vector<double> t_grid = cfg.t_grid.empty() ? std::vector<double>{5, 10, 20, 40, 80, 160} : cfg.t_grid;
  const RngStream cycles = base.split(2);

  std::optional<TailEstimate> C3_tail, C3_cond;
  try {
    const C3TailResult tail = estimate_C3_tail(spec, alpha, x_grid, R, cycles, policy);
    C3_tail = tail.estimate;
    for (std::size_t g = 0; g < x_grid.size(); ++g) {
      ReportRow row = make_row(e, 0, x_grid[g], tail.curve[g], 1.0);
      row.flags.insert(row.flags.begin(), "curve=C3-tail-plateau");
      report.rows.push_back(row);
    }
    report.summary.push_back(summary_row(e, "plateau-flatness", tail.flatness, 0.0, 2.0, tail.flatness <= 2.0));
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::GridUnstable) throw;
    report.summary.push_back(summary_row(e, "plateau-grid-unstable", 0.0, 0.0, 1.0, false));
  }
  try {
    const C3ConditionalResult cond = estimate_C3_conditional(spec, alpha, C2, t_grid, R, cycles, policy);
    C3_cond = cond.estimate;
    for (const auto& pt : cond.curve) {
      ReportRow joint = make_row(e, 0, pt.t, pt.joint_moment, 1.0);
      joint.flags.insert(joint.flags.begin(), "curve=first-passage-joint-moment");
      report.rows.push_back(joint);
      ReportRow condr = make_row(e, 0, pt.t, pt.conditional_moment, std::pow(pt.t, alpha));
      condr.flags.insert(condr.flags.begin(), "curve=first-passage-conditional-moment");
      report.rows.push_back(condr);
      ReportRow hit = make_row(e, 0, pt.t, pt.hit_probability, 1.0);
      hit.flags.insert(hit.flags.begin(), "curve=first-passage-probability");
      report.rows.push_back(hit);
    }
    report.summary.push_back(summary_row(e, "stabilization", cond.stabilization, 0.0, 0.1, cond.stabilization < 0.1,
                                         0, cond.t_used));
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::NotStabilized) throw;
    report.summary.push_back(summary_row(e, "first-passage-not-stabilized", 0.0, 0.0, 1.0, false));
  }
  if (!C3_tail && !C3_cond) {
    throw Error(ErrorKind::NotStabilized, "neither C3 route produced an estimate");
  }
  if (C3_tail && C3_cond) {
    const double combined = std::hypot(C3_tail->se, C3_cond->se);
    const double z = std::abs(C3_tail->estimate - C3_cond->estimate) / combined;
    auto row = summary_row(e, "route-agreement", C3_tail->estimate, C3_tail->se, C3_cond->estimate, z <= 2.0);
    row.flags.push_back("z=" + fmt(z));
    report.summary.push_back(row);
  }

  const TailEstimate& C3 = C3_tail ? *C3_tail : *C3_cond;
  const TailEstimate C1 = ratio_C1(C3, Enu);
  const ComposedConstants composed = compose_constants(prof, C1);

  report.constants = {Enu, C2};
  if (C3_tail) report.constants.push_back(*C3_tail);
  if (C3_cond) report.constants.push_back(*C3_cond);
  report.constants.push_back(composed.C1);
  report.constants.push_back(composed.C_alpha);
  try {
    const auto sums = sample_cycle_sums(spec, R, cycles, policy);
    TailEstimate hill = hill_diagnostic(sums, cfg.hill_fraction);
    report.constants.push_back(hill);
    const double z = std::abs(hill.estimate - alpha) / hill.se;
    auto row = summary_row(e, "hill-vs-alpha", hill.estimate, hill.se, alpha, z <= 3.0);
    row.flags.push_back("z=" + fmt(z));
    report.summary.push_back(row);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::TooFewSamples) throw;
    report.summary.push_back(summary_row(e, "hill-too-few-samples", 0.0, 0.0, 1.0, false));
  }
  std::vector<ReportRow> rows;
  for (const auto& t : report.constants) rows.push_back(constant_row(t));
  report.rows.insert(report.rows.begin(), rows.begin(), rows.end());
  return report;
}

// ---------------------------------------------------------------- walk theorems

namespace {

// Counts X_n < threshold for each threshold over independent (env, walk) pairs.
std::vector<McEstimate> position_hits(const EnvSpec& spec, std::int64_t n, const std::vector<double>& thresholds,
                                      std::uint64_t replicas, const RngStream& stream, ExecPolicy policy) {
  const std::size_t K = thresholds.size();
  auto chunks = map_chunks(replicas, policy, [&](std::uint64_t begin, std::uint64_t end) {
    std::vector<std::uint64_t> hits(K, 0);
    for (std::uint64_t i = begin; i < end; ++i) {
      const RngStream r = stream.split(i);
      QuenchedEnv env(spec, r.split(0));
      RngStream walk = r.split(1);
      const double X = static_cast<double>(position_after(env, n, walk));
      for (std::size_t k = 0; k < K; ++k) hits[k] += X < thresholds[k];
    }
    return hits;
  });
  std::vector<std::uint64_t> hits(K, 0);
  for (const auto& c : chunks) {
    for (std::size_t k = 0; k < K; ++k) hits[k] += c[k];
  }
  std::vector<McEstimate> out;
  for (auto h : hits) out.push_back(indicator_estimate(h, replicas));
  return out;
}

void curve_summaries(ExperimentReport& report, const ExperimentConfig& cfg, const std::vector<const ReportRow*>& rows,
                     double slope_target, const std::string& label) {
  if (auto fit = log_slope(rows)) {
    const bool ok = std::abs(fit->slope - slope_target) <= 0.15;
    report.summary.push_back(summary_row(report.experiment, "slope" + label, fit->slope, fit->slope_se, slope_target, ok));
  } else {
    report.summary.push_back(summary_row(report.experiment, "slope" + label, 0.0, 0.0, slope_target, false));
  }
  const double flat = top_half_flatness(rows);
  report.summary.push_back(summary_row(report.experiment, "flatness" + label, std::isfinite(flat) ? flat : 0.0, 0.0,
                                       1.5, flat < 1.5));
  add_reference_comparison(report, cfg, rows, label);
}

}  // namespace

ExperimentReport run_thm_main1(const ExperimentConfig& cfg) {
  EnvSpec spec = cfg.env;
  spec.require_transient();
  const Experiment e = Experiment::ThmMain1;
  const CumulantProfile prof = profile(spec);
  require_nonarithmetic(prof);
  if (!(prof.alpha > 1.0) || prof.regime != Regime::Ballistic) {
    throw Error(ErrorKind::RegimeMismatch, "thm-main1 needs a ballistic law with alpha > 1");
  }
  const double v = prof.speed_v;
  const double alpha = prof.alpha;
  XRule rule = cfg.x_rule.value_or(XRule{XRule::Kind::Epsilon, {v / 2.0}});
  if (rule.kind != XRule::Kind::Epsilon) throw Error(ErrorKind::ConfigError, "thm-main1 takes an epsilon x_rule");
  for (double eps : rule.values) {
    if (!(eps > 0.0 && eps < v)) {
      throw Error(ErrorKind::RegimeMismatch, "epsilon = " + fmt(eps) + " must lie in (0, v) with v = " + fmt(v));
    }
  }
  const auto grid = n_grid_or(cfg, {500, 1000, 2000, 4000});
  const RngStream base(cfg.seed, 0);
  const double floor_p = low_probability_floor(cfg);

  ExperimentReport report;
  report.experiment = e;
  std::vector<std::vector<ReportRow>> by_eps(rule.values.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const std::int64_t n = grid[c];
    const double nd = static_cast<double>(n);
    const double log_n = std::log(nd);
    const double lower = alpha <= 2.0 ? std::pow(nd, 1.0 / alpha) * std::pow(log_n, cfg.window.M)
                                      : cfg.window.c_scale * log_n * std::sqrt(nd) * log_n;
    const double upper = v * nd - cfg.window.b_fraction * v * nd;
    std::vector<double> thresholds;
    std::vector<std::size_t> live;
    for (std::size_t k = 0; k < rule.values.size(); ++k) {
      const double eps = rule.values[k];
      const double normalizer = (v - eps) * std::pow(eps, -alpha) * std::pow(nd, 1.0 - alpha);
      if (heuristic_probability(cfg, normalizer) < floor_p) {
        by_eps[k].push_back(refused_row(e, n, eps * nd, normalizer));
        continue;
      }
      thresholds.push_back((v - eps) * nd);
      live.push_back(k);
    }
    if (live.empty()) continue;
    const auto est = position_hits(spec, n, thresholds, cfg.replicas, base.split(c), {cfg.workers});
    for (std::size_t j = 0; j < live.size(); ++j) {
      const double eps = rule.values[live[j]];
      const double x = eps * nd;
      ReportRow row = make_row(e, n, x, est[j], (v - eps) * std::pow(eps, -alpha) * std::pow(nd, 1.0 - alpha));
      row.flags.insert(row.flags.begin(), "epsilon=" + fmt(eps));
      if (!(x > lower && x < upper)) row.flags.push_back("outside-window");
      by_eps[live[j]].push_back(row);
    }
  }
  for (std::size_t k = 0; k < rule.values.size(); ++k) {
    std::vector<const ReportRow*> live_rows;
    for (const auto& r : by_eps[k]) {
      report.rows.push_back(r);
    }
    for (const auto& r : by_eps[k]) {
      if (!r.has_flag("refused-low-probability")) live_rows.push_back(&r);
    }
    curve_summaries(report, cfg, live_rows, 1.0 - alpha, ":epsilon=" + fmt(rule.values[k]));
  }
  return report;
}

ExperimentReport run_thm_main2(const ExperimentConfig& cfg) {
  EnvSpec spec = cfg.env;
  spec.require_transient();
  const Experiment e = Experiment::ThmMain2;
  const CumulantProfile prof = profile(spec);
  require_nonarithmetic(prof);
  if (!(prof.alpha <= 1.0)) throw Error(ErrorKind::RegimeMismatch, "thm-main2 needs alpha <= 1");
  const double alpha = prof.alpha;
  XRule rule = cfg.x_rule.value_or(XRule{XRule::Kind::NBeta, {alpha / 2.0}});
  if (rule.kind != XRule::Kind::NBeta) throw Error(ErrorKind::ConfigError, "thm-main2 takes an n_beta x_rule");
  for (double beta : rule.values) {
    if (!(beta > 0.0 && beta < alpha)) {
      throw Error(ErrorKind::RegimeMismatch, "beta = " + fmt(beta) + " must lie in (0, alpha) with alpha = " + fmt(alpha));
    }
  }
  const auto grid = n_grid_or(cfg, {1000, 10000});
  const RngStream base(cfg.seed, 0);
  const double floor_p = low_probability_floor(cfg);

  ExperimentReport report;
  report.experiment = e;
  std::vector<std::vector<ReportRow>> by_beta(rule.values.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const std::int64_t n = grid[c];
    const double nd = static_cast<double>(n);
    const double log_n = std::log(nd);
    const double lower = cfg.window.c_scale * log_n * log_n;
    const double upper = std::pow(nd, alpha) / std::pow(log_n, cfg.window.M);
    std::vector<double> thresholds;
    std::vector<std::size_t> live;
    for (std::size_t k = 0; k < rule.values.size(); ++k) {
      const double x = std::pow(nd, rule.values[k]);
      const double normalizer = x * std::pow(nd, -alpha);
      if (heuristic_probability(cfg, normalizer) < floor_p) {
        by_beta[k].push_back(refused_row(e, n, x, normalizer));
        continue;
      }
      thresholds.push_back(x);
      live.push_back(k);
    }
    if (live.empty()) continue;
    const auto est = position_hits(spec, n, thresholds, cfg.replicas, base.split(c), {cfg.workers});
    for (std::size_t j = 0; j < live.size(); ++j) {
      const double beta = rule.values[live[j]];
      const double x = thresholds[j];
      ReportRow row = make_row(e, n, x, est[j], x * std::pow(nd, -alpha));
      row.flags.insert(row.flags.begin(), "beta=" + fmt(beta));
      if (!(x > lower && x < upper)) row.flags.push_back("outside-window");
      by_beta[live[j]].push_back(row);
    }
  }
  for (std::size_t k = 0; k < rule.values.size(); ++k) {
    std::vector<const ReportRow*> live_rows;
    for (const auto& r : by_beta[k]) report.rows.push_back(r);
    for (const auto& r : by_beta[k]) {
      if (!r.has_flag("refused-low-probability")) live_rows.push_back(&r);
    }
    curve_summaries(report, cfg, live_rows, rule.values[k] - alpha, ":beta=" + fmt(rule.values[k]));
  }
  return report;
}

// ---------------------------------------------------------------- total progeny

ExperimentReport run_thm_wn(const ExperimentConfig& cfg) {
  EnvSpec spec = cfg.env;
  spec.require_transient();
  const Experiment e = Experiment::ThmWn;
  const CumulantProfile prof = profile(spec);
  require_nonarithmetic(prof);
  const double alpha = prof.alpha;
  XRule rule = cfg.x_rule.value_or(XRule{XRule::Kind::WindowInterior, {2.0}});
  const auto grid = n_grid_or(cfg, {100, 200, 400, 800});
  const RngStream base(cfg.seed, 0);
  const double floor_p = low_probability_floor(cfg);
  const double rho = prof.mean_A;

  ExperimentReport report;
  report.experiment = e;
  double worst_shift = 0.0;
  std::vector<const ReportRow*> interior;
  std::vector<ReportRow> rows;
  rows.reserve(grid.size() * rule.values.size() * 2);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const std::int64_t n = grid[c];
    const double nd = static_cast<double>(n);
    const double log_n = std::log(nd);
    const double lower = alpha <= 2.0 ? std::pow(nd, 1.0 / alpha) * std::pow(log_n, cfg.window.M)
                                      : cfg.window.c_scale * log_n * std::sqrt(nd) * log_n;
    const double log_upper = cfg.window.s_scale * nd / log_n;
    std::vector<double> xs;
    for (double value : rule.values) {
      double x = value;
      switch (rule.kind) {
        case XRule::Kind::Fixed: x = value; break;
        case XRule::Kind::Epsilon: x = value * nd; break;
        case XRule::Kind::NBeta: x = std::pow(nd, value); break;
        case XRule::Kind::WindowInterior: x = value * lower; break;
      }
      if (!(x > lower && std::log(x) < log_upper)) {
        throw Error(ErrorKind::WindowDegenerate,
                    "x = " + fmt(x) + " lies outside the window (" + fmt(lower) + ", e^" + fmt(log_upper) + ") at n = " +
                        std::to_string(n));
      }
      xs.push_back(x);
    }
    std::vector<std::size_t> live;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double normalizer = nd * std::pow(xs[k], -alpha);
      if (heuristic_probability(cfg, normalizer) < floor_p) {
        rows.push_back(refused_row(e, n, xs[k], normalizer));
      } else {
        live.push_back(k);
      }
    }
    if (live.empty()) continue;

    const RngStream cell = base.split(c);
    const auto W = map_replicas<double>(cfg.replicas, {cfg.workers}, [&](std::uint64_t i) {
      RngStream r = cell.split(i);
      return static_cast<double>(total_progeny_W(spec, n, r));
    });
    MeanAccumulator mean;
    for (double w : W) mean.add(w);
    const double d_analytic = alpha > 1.0 ? nd * rho / (1.0 - rho) : 0.0;
    const double d_empirical = alpha > 1.0 ? mean.mean() : 0.0;
    for (auto k : live) {
      const double x = xs[k];
      std::uint64_t hits_a = 0, hits_e = 0;
      for (double w : W) {
        hits_a += w - d_analytic > x;
        hits_e += w - d_empirical > x;
      }
      const double normalizer = nd * std::pow(x, -alpha);
      ReportRow ra = make_row(e, n, x, indicator_estimate(hits_a, cfg.replicas), normalizer);
      ra.flags.insert(ra.flags.begin(), "d_n=analytic");
      ReportRow re = make_row(e, n, x, indicator_estimate(hits_e, cfg.replicas), normalizer);
      re.flags.insert(re.flags.begin(), "d_n=empirical");
      const double shift = std::abs(ra.ratio - re.ratio) / std::max(std::hypot(ra.ratio_se, re.ratio_se), 1e-300);
      worst_shift = std::max(worst_shift, shift);
      rows.push_back(ra);
      rows.push_back(re);
    }
  }
  report.rows = rows;
  for (const auto& r : report.rows) {
    if (r.has_flag("d_n=analytic") && !r.has_flag("refused-low-probability")) interior.push_back(&r);
  }
  double lo = kInfinity, hi = 0.0;
  for (const auto* r : interior) {
    lo = std::min(lo, r->ratio);
    hi = std::max(hi, r->ratio);
  }
  const double flat = lo > 0.0 ? hi / lo : kInfinity;
  report.summary.push_back(summary_row(e, "flatness", std::isfinite(flat) ? flat : 0.0, 0.0, 1.5, flat < 1.5));
  report.summary.push_back(summary_row(e, "d_n-shift", worst_shift, 0.0, 1.0, worst_shift < 1.0));
  add_reference_comparison(report, cfg, interior, "");
  return report;
}

// ---------------------------------------------------------------- Bahadur-Rao

ExperimentReport run_bahadur_rao(const ExperimentConfig& cfg) {
  const EnvSpec& spec = cfg.env;
  const Experiment e = Experiment::BahadurRao;
  const CumulantProfile prof = profile(spec);
  require_nonarithmetic(prof);
  const std::vector<double> rhos = cfg.rho_grid.empty() ? std::vector<double>{prof.rho0} : cfg.rho_grid;
  const auto grid = n_grid_or(cfg, {10, 15, 20, 25, 30, 35, 40});
  const RngStream base(cfg.seed, 0);
  const ExecPolicy policy{cfg.workers};

  ExperimentReport report;
  report.experiment = e;
  for (std::size_t r = 0; r < rhos.size(); ++r) {
    const double rho = rhos[r];
    const double s = tilt_for_level(spec, rho);
    const double rate = legendre(spec, rho);
    const RngStream rho_stream = base.split(r);
    double lo = kInfinity, hi = -kInfinity;
    std::optional<McEstimate> first;
    for (std::size_t c = 0; c < grid.size(); ++c) {
      const std::int64_t n = grid[c];
      const double nd = static_cast<double>(n);
      const double x = std::exp(nd * rho);
      const McEstimate est = tilted_product_tail(spec, n, x, cfg.replicas, rho_stream.split(c), s, policy);
      const double normalizer = std::exp(-nd * rate) / std::sqrt(nd);
      ReportRow row = make_row(e, n, x, est, normalizer);
      row.flags.insert(row.flags.begin(), "rho=" + fmt(rho));
      row.flags.push_back("tilt=" + fmt(s));
      report.rows.push_back(row);
      if (est.value > 0.0) {
        const double log_ratio = std::log(row.ratio);
        lo = std::min(lo, log_ratio);
        hi = std::max(hi, log_ratio);
      }
      if (c == 0) first = est;
    }
    const double flat = hi >= lo ? hi - lo : kInfinity;
    report.summary.push_back(summary_row(e, "flatness:rho=" + fmt(rho), std::isfinite(flat) ? flat : 0.0, 0.0, 0.5,
                                         flat < 0.5));

    const std::int64_t n0 = grid.front();
    const std::uint64_t plain_r = cfg.plain_replicas.value_or(cfg.replicas);
    const McEstimate plain =
        plain_product_tail(spec, n0, std::exp(static_cast<double>(n0) * rho), plain_r, rho_stream.split(0xB1A1), policy);
    const double combined = std::hypot(plain.se, first->se);
    const double z = combined > 0.0 ? std::abs(plain.value - first->value) / combined : 0.0;
    ReportRow row = summary_row(e, "plain-cross-check:rho=" + fmt(rho), plain.value, plain.se, first->value, z <= 3.0,
                                n0, std::exp(static_cast<double>(n0) * rho));
    row.replicas = plain_r;
    row.flags.push_back("z=" + fmt(z));
    if (plain.hits < kMinHits) row.flags.push_back("low-confidence");
    report.summary.push_back(row);
  }
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::Identities: return run_identities(cfg);
    case Experiment::Constants: return run_constants(cfg);
    case Experiment::ThmMain1: return run_thm_main1(cfg);
    case Experiment::ThmMain2: return run_thm_main2(cfg);
    case Experiment::ThmWn: return run_thm_wn(cfg);
    case Experiment::BahadurRao: return run_bahadur_rao(cfg);
    case Experiment::AnalyzeEnv: break;
  }
  throw Error(ErrorKind::ConfigError, "analyze-env does not produce an experiment report");
}

nlohmann::json analyze_env(const EnvSpec& spec) {
  json out;
  out["env"] = to_json(spec);
  out["mean_logA"] = mean_log_A(spec);
  out["mean_omega"] = mean_omega(spec);
  out["prob_A_greater_one"] = prob_A_greater_one(spec);
  out["arithmetic"] = is_arithmetic(spec);
  try {
    const CumulantProfile prof = profile(spec);
    out["profile"] = to_json(prof);
    out["kesten_C2_denominator"] = kesten_C2_denominator(spec);
    if (auto c2 = kesten_C2_closed_form(spec)) out["C2_closed_form"] = *c2;
  } catch (const Error& err) {
    out["profile_error"] = {{"kind", to_string(err.kind())}, {"message", err.what()}};
  }
  return out;
}

void write_report_csv(std::ostream& os, const ExperimentReport& report) {
  os << "experiment,n,x,estimate,se,normalizer,ratio,ratio_se,replicas,flags\n";
  auto emit = [&](const ReportRow& r) {
    std::string flags;
    for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
    os << r.experiment << ',' << r.n << ',' << fmt(r.x) << ',' << fmt(r.estimate) << ',' << fmt(r.se) << ','
       << fmt(r.normalizer) << ',' << fmt(r.ratio) << ',' << fmt(r.ratio_se) << ',' << r.replicas << ',' << flags
       << '\n';
  };
  for (const auto& r : report.rows) emit(r);
  for (const auto& r : report.summary) emit(r);
}

}  // namespace rwre
