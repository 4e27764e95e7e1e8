// strictbounds command-line tool.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <strictbounds/io.hpp>
#include <strictbounds/strictbounds.hpp>

namespace sb = strictbounds;
using sb::Json;

namespace {

enum Exit { kOk = 0, kInputError = 1, kEmpty = 2, kNumerical = 3 };

struct Common {
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string output;
  std::string format = "json";
};

struct ModelSource {
  std::string preset;
  std::string model_path;
};

std::uint64_t resolve_seed(const Common& c) {
  if (c.seed) return *c.seed;
  if (const char* env = std::getenv("CI_SEED")) {
    try {
      std::size_t used = 0;
      auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw sb::InputError("CI_SEED must be an unsigned integer");
  }
  return 20240601ULL;
}

void add_common(CLI::App* app, Common& c, bool with_format = false) {
  app->add_option("--seed", c.seed, "RNG seed (default: $CI_SEED, else 20240601)");
  app->add_option("--threads", c.threads, "Worker threads (0 = logical cores)")->default_val(0);
  app->add_option("-o,--output", c.output, "Output file (default: stdout)");
  if (with_format) app->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
}

void add_model(CLI::App* app, ModelSource& m) {
  auto* p = app->add_option("--preset", m.preset, "Built-in scenario")->check(CLI::IsMember(sb::presets::names()));
  auto* f = app->add_option("--model", m.model_path, "Model JSON file");
  p->excludes(f);
  f->excludes(p);
}

/// Scenario from --preset, or a custom one around --model.
sb::Scenario resolve_scenario(const ModelSource& m) {
  if (!m.preset.empty()) return sb::presets::by_name(m.preset);
  if (m.model_path.empty()) throw sb::InputError("one of --preset or --model is required");
  sb::ProblemInstance inst = sb::load_model(m.model_path);
  sb::Scenario sc{"custom", inst, {}, {0.05}, 10000, {sb::Method::SSB, sb::Method::OSB}, {}};
  sc.rules.search_box = sb::default_search_box(inst);
  if (sc.rules.search_box) {
    auto range = sb::ConstraintSet::box(sc.rules.search_box->lower, sc.rules.search_box->upper)
                     .functional_range(inst.h());
    double step = (range.second - range.first) / 20.0;
    if (step > 0) sc.rules.mu_grid = sb::presets::arange(range.first, range.second, step);
    else sc.rules.mu_grid = {range.first};
  }
  return sc;
}

Json source_json(const ModelSource& m) {
  if (!m.preset.empty()) return Json{{"preset", m.preset}};
  return Json{{"model", m.model_path}};
}

Json envelope(const std::string& cmd, std::uint64_t seed, Json config) {
  Json j;
  j["command"] = cmd;
  j["version"] = sb::kVersion;
  j["seed"] = seed;
  j["config"] = std::move(config);
  return j;
}

void emit(const Common& c, const std::string& text) {
  if (c.output.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(c.output, std::ios::binary);
  if (!out) throw sb::InputError("cannot write '" + c.output + "'");
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sb::InputError("cannot write '" + path + "'");
  out << text;
}

sb::Method parse_method(const std::string& s) {
  if (s == "ssb") return sb::Method::SSB;
  if (s == "osb") return sb::Method::OSB;
  if (s == "mq") return sb::Method::MQ;
  if (s == "mqmu") return sb::Method::MQmu;
  if (s == "closed-form") return sb::Method::ClosedForm;
  throw sb::InputError("unknown method '" + s + "'");
}

const std::vector<std::string> kMethodNames{"ssb", "osb", "mq", "mqmu", "closed-form"};

Json vec_json(const std::vector<double>& v) { return Json(v); }

// ---- interval ---------------------------------------------------------------

struct IntervalCfg {
  Common common;
  ModelSource model;
  std::string y, y_file, simulate_from, method = "osb", rule_path;
  double alpha = 0.05;
  int budget = 40;
  std::size_t n_per_eval = 10000;
};

int cmd_interval(const IntervalCfg& cfg) {
  const std::uint64_t seed = resolve_seed(cfg.common);
  sb::Scenario sc = resolve_scenario(cfg.model);
  const sb::ProblemInstance& inst = sc.inst;
  const int sources = !cfg.y.empty() + !cfg.y_file.empty() + !cfg.simulate_from.empty();
  if (sources != 1) throw sb::InputError("give exactly one of --y, --y-file, --simulate-from");
  sb::VectorXd y;
  if (!cfg.y.empty()) y = sb::parse_number_list(cfg.y, "--y");
  else if (!cfg.y_file.empty()) y = sb::load_observation(cfg.y_file);
  else {
    sb::VectorXd x = sb::parse_number_list(cfg.simulate_from, "--simulate-from");
    sb::Engine eng = sb::StreamFamily(seed).stream(0);
    y = sb::simulate(inst, sb::ParameterPoint{x}, eng);
  }
  if (y.size() != inst.m()) throw sb::InputError("observation has " + std::to_string(y.size()) +
                                                 " values, model expects " + std::to_string(inst.m()));
  const sb::Method method = parse_method(cfg.method);
  sb::LlrStatistic stat(inst);
  sb::QpSolver ws;
  sb::IntervalResult r;
  std::optional<sb::DecisionRule> rule;
  switch (method) {
    case sb::Method::SSB: r = sb::interval_ssb(stat, y, cfg.alpha, ws); break;
    case sb::Method::OSB: r = sb::interval_osb(stat, y, cfg.alpha, ws); break;
    case sb::Method::ClosedForm: r = sb::interval_unconstrained_closed_form(inst, y, cfg.alpha); break;
    case sb::Method::MQ:
    case sb::Method::MQmu: {
      if (!cfg.rule_path.empty()) {
        rule = sb::decision_rule_from_json(sb::parse_json(sb::read_file(cfg.rule_path), cfg.rule_path));
      } else {
        sc.methods = {method};
        sc.rules.options.budget = cfg.budget;
        sc.rules.options.n_per_eval = cfg.n_per_eval;
        sc.rules.options.threads = cfg.common.threads;
        auto rs = sb::compute_rules(sc, stat, cfg.alpha, sb::StreamFamily(seed).child(100));
        rule = method == sb::Method::MQ ? *rs.mq : *rs.mqmu;
      }
      r = method == sb::Method::MQ ? sb::interval_mq(stat, y, cfg.alpha, *rule, ws)
                                   : sb::interval_mqmu(stat, y, cfg.alpha, *rule, ws);
      break;
    }
    default: throw sb::InputError("unsupported method");
  }
  Json config{{"source", source_json(cfg.model)}, {"method", cfg.method}, {"alpha", cfg.alpha},
              {"y", sb::vector_to_json(y)}, {"threads", cfg.common.threads}};
  if (!cfg.rule_path.empty()) config["rule"] = cfg.rule_path;
  if (method == sb::Method::MQ || method == sb::Method::MQmu) {
    config["budget"] = cfg.budget;
    config["n_per_eval"] = cfg.n_per_eval;
  }
  Json out = envelope("interval", seed, config);
  out["result"] = sb::to_json(r);
  if (rule && !rule->is_function()) out["rule"] = sb::to_json(*rule);
  emit(cfg.common, out.dump(2));
  return r.empty ? kEmpty : kOk;
}

// ---- coverage ---------------------------------------------------------------

struct CoverageCfg {
  Common common;
  ModelSource model;
  std::size_t reps = 0;
  std::vector<double> alphas;
  std::vector<std::string> methods;
  std::vector<std::string> truths;
  int budget = 40;
  std::size_t n_per_eval = 10000;
};

int cmd_coverage(const CoverageCfg& cfg) {
  const std::uint64_t seed = resolve_seed(cfg.common);
  sb::Scenario sc = resolve_scenario(cfg.model);
  if (cfg.reps > 0) sc.reps = cfg.reps;
  if (!cfg.alphas.empty()) sc.alpha_levels = cfg.alphas;
  if (!cfg.methods.empty()) {
    sc.methods.clear();
    for (const auto& m : cfg.methods) sc.methods.push_back(parse_method(m));
  }
  if (!cfg.truths.empty()) {
    sc.truths.clear();
    for (const auto& t : cfg.truths) sc.truths.push_back({sb::parse_number_list(t, "--truth")});
  }
  if (sc.truths.empty()) throw sb::InputError("custom models need at least one --truth");
  sc.rules.options.budget = cfg.budget;
  sc.rules.options.n_per_eval = cfg.n_per_eval;
  sc.rules.options.threads = cfg.common.threads;
  sb::CoverageOptions opt;
  opt.threads = cfg.common.threads;
  auto rep = sb::run_coverage(sc, sb::StreamFamily(seed), opt);

  Json config{{"source", source_json(cfg.model)}, {"reps", sc.reps},        {"alphas", sc.alpha_levels},
              {"budget", cfg.budget},           {"n_per_eval", cfg.n_per_eval}, {"threads", cfg.common.threads}};
  Json methods = Json::array();
  for (auto m : sc.methods) methods.push_back(sb::to_string(m));
  config["methods"] = methods;
  Json truths = Json::array();
  for (const auto& t : sc.truths) truths.push_back(sb::vector_to_json(t.x));
  config["truths"] = truths;
  Json meta = envelope("coverage", seed, config);
  meta["report"] = sb::to_json(rep);
  if (cfg.common.format == "csv") {
    emit(cfg.common, rep.to_csv());
    if (!cfg.common.output.empty()) write_file(cfg.common.output + ".json", meta.dump(2) + "\n");
  } else {
    emit(cfg.common, meta.dump(2));
  }
  if (rep.total_failures() > 0) {
    std::cerr << "coverage: " << rep.total_failures() << " replicate-level failures\n";
    return kNumerical;
  }
  return kOk;
}

// ---- maxq -------------------------------------------------------------------

struct MaxqCfg {
  Common common;
  ModelSource model;
  double level = 0.95;
  int budget = 200;
  std::size_t n_per_eval = 10000;
  std::string box_lower, box_upper, mu_grid;
  bool per_mu = false;
};

int cmd_maxq(const MaxqCfg& cfg) {
  const std::uint64_t seed = resolve_seed(cfg.common);
  sb::Scenario sc = resolve_scenario(cfg.model);
  std::optional<sb::Box> box = sc.rules.search_box;
  if (!cfg.box_lower.empty() || !cfg.box_upper.empty()) {
    if (cfg.box_lower.empty() || cfg.box_upper.empty()) throw sb::InputError("give both --box-lower and --box-upper");
    box = sb::Box{sb::parse_number_list(cfg.box_lower, "--box-lower"), sb::parse_number_list(cfg.box_upper, "--box-upper")};
  }
  if (!box) throw sb::InputError("this model needs --box-lower/--box-upper");
  sb::LlrStatistic stat(sc.inst);
  sb::MaxQuantileOptions opt{cfg.budget, cfg.n_per_eval, cfg.common.threads};
  const sb::StreamFamily rng(seed);
  Json config{{"source", source_json(cfg.model)}, {"level", cfg.level},           {"budget", cfg.budget},
              {"n_per_eval", cfg.n_per_eval},   {"box_lower", sb::vector_to_json(box->lower)},
              {"box_upper", sb::vector_to_json(box->upper)}, {"per_mu", cfg.per_mu}, {"threads", cfg.common.threads}};
  Json out = envelope("maxq", seed, config);
  if (cfg.per_mu) {
    std::vector<double> grid = sc.rules.mu_grid;
    if (!cfg.mu_grid.empty()) {
      sb::VectorXd g = sb::parse_number_list(cfg.mu_grid, "--mu-grid");
      grid.assign(g.data(), g.data() + g.size());
    }
    if (grid.empty()) throw sb::InputError("--per-mu needs --mu-grid");
    out["config"]["mu_grid"] = grid;
    auto res = sb::max_quantile_per_mu(stat, cfg.level, grid, *box, opt, rng);
    out["rule"] = sb::to_json(res.to_rule(cfg.level, seed));
    Json per = Json::array();
    for (const auto& r : res.per_mu) per.push_back(sb::to_json(r));
    out["per_mu"] = per;
    out["dropped_mu"] = res.dropped;
  } else {
    auto res = sb::max_quantile(stat, cfg.level, *box, opt, rng);
    out["result"] = sb::to_json(res);
    out["rule"] = sb::to_json(res.to_rule());
  }
  emit(cfg.common, out.dump(2));
  return kOk;
}

// ---- dominance --------------------------------------------------------------

struct DominanceCfg {
  Common common;
  ModelSource model;
  std::string xstar;
  std::size_t n = 1000000;
  int dof = 1;
  std::string csv_path;
};

int cmd_dominance(const DominanceCfg& cfg) {
  const std::uint64_t seed = resolve_seed(cfg.common);
  sb::Scenario sc = resolve_scenario(cfg.model);
  sb::VectorXd x = sb::parse_number_list(cfg.xstar, "--xstar");
  sb::LlrStatistic stat(sc.inst);
  auto sample = sb::sample_null(stat, sb::ParameterPoint{x}, cfg.n, sb::StreamFamily(seed), cfg.common.threads);
  auto rep = sb::dominance_diagnostic(sample, sb::ChiSquareReference{cfg.dof});
  if (!cfg.csv_path.empty()) write_file(cfg.csv_path, rep.to_csv());
  Json config{{"source", source_json(cfg.model)}, {"xstar", sb::vector_to_json(x)}, {"n", cfg.n},
              {"dof", cfg.dof}, {"threads", cfg.common.threads}};
  if (!cfg.csv_path.empty()) config["csv"] = cfg.csv_path;
  Json out = envelope("dominance", seed, config);
  out["result"] = sb::to_json(rep);
  auto ms = sb::mean_estimate(sample);
  out["result"]["mean"] = ms.first;
  out["result"]["mean_se"] = ms.second;
  if (cfg.common.format == "csv") emit(cfg.common, rep.to_csv());
  else emit(cfg.common, out.dump(2));
  return kOk;
}

// ---- counterexample ---------------------------------------------------------

struct CounterexampleCfg {
  Common common;
  std::string check = "mean";
  std::size_t n = 1000000;
  std::string p_list = "3,6,12,24";
};

int cmd_counterexample(const CounterexampleCfg& cfg) {
  const std::uint64_t seed = resolve_seed(cfg.common);
  const sb::StreamFamily rng(seed);
  Json config{{"check", cfg.check}, {"n", cfg.n}, {"threads", cfg.common.threads}};
  Json out;
  if (cfg.check == "mean") {
    out = envelope("counterexample", seed, config);
    out["result"] = sb::to_json(sb::run_counterexample_mean(cfg.n, rng, cfg.common.threads));
  } else if (cfg.check == "divergence") {
    sb::VectorXd p = sb::parse_number_list(cfg.p_list, "--p-list");
    std::vector<sb::Index> ps;
    for (sb::Index i = 0; i < p.size(); ++i) ps.push_back(static_cast<sb::Index>(p[i]));
    config["p_list"] = ps;
    out = envelope("counterexample", seed, config);
    out["result"] = sb::to_json(sb::run_dimension_divergence(ps, cfg.n, rng, cfg.common.threads));
  } else if (cfg.check == "coupling") {
    out = envelope("counterexample", seed, config);
    out["result"] = sb::to_json(sb::run_coupling_check(cfg.n, rng, cfg.common.threads));
  } else {
    throw sb::InputError("--check must be mean, divergence or coupling");
  }
  emit(cfg.common, out.dump(2));
  return kOk;
}

// ---- quantile-curve -----------------------------------------------------------

struct CurveCfg {
  Common common;
  double level = 0.68;
  std::string t_grid = "0.05,0.1,0.2,0.4,0.8,1.2,1.6,2.0,2.4,2.718281828459045";
  std::size_t n = 100000;
};

int cmd_quantile_curve(const CurveCfg& cfg) {
  const std::uint64_t seed = resolve_seed(cfg.common);
  sb::VectorXd t = sb::parse_number_list(cfg.t_grid, "--t-grid");
  std::vector<double> grid(t.data(), t.data() + t.size());
  auto rep = sb::run_quantile_curve(cfg.level, grid, cfg.n, sb::StreamFamily(seed), cfg.common.threads);
  Json out = envelope("quantile-curve", seed,
                      Json{{"level", cfg.level}, {"t_grid", grid}, {"n", cfg.n}, {"threads", cfg.common.threads}});
  out["result"] = sb::to_json(rep);
  if (cfg.common.format == "csv") emit(cfg.common, rep.to_csv());
  else emit(cfg.common, out.dump(2));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence intervals for linear functionals under constraints, by inverting likelihood-ratio tests"};
  app.set_version_flag("--version", std::string(sb::kVersion));
  app.require_subcommand(1);

  IntervalCfg icfg;
  auto* interval = app.add_subcommand("interval", "Interval for h^T x from one observation");
  add_common(interval, icfg.common);
  add_model(interval, icfg.model);
  interval->add_option("--y", icfg.y, "Observation values, comma separated");
  interval->add_option("--y-file", icfg.y_file, "Observation file (CSV or JSON array)");
  interval->add_option("--simulate-from", icfg.simulate_from, "Simulate y from this truth x");
  interval->add_option("--method", icfg.method, "Interval method")->check(CLI::IsMember(kMethodNames));
  interval->add_option("--alpha", icfg.alpha, "Miscoverage level")->required();
  interval->add_option("--rule", icfg.rule_path, "Decision rule JSON for mq / mqmu");
  interval->add_option("--budget", icfg.budget, "Quantile evaluations per search (mq / mqmu)");
  interval->add_option("--n-per-eval", icfg.n_per_eval, "Null draws per quantile evaluation");

  CoverageCfg ccfg;
  auto* coverage = app.add_subcommand("coverage", "Monte Carlo coverage and length study");
  add_common(coverage, ccfg.common, true);
  add_model(coverage, ccfg.model);
  coverage->add_option("--reps", ccfg.reps, "Replicates per truth (default: preset)");
  coverage->add_option("--alpha", ccfg.alphas, "Miscoverage level(s)");
  coverage->add_option("--methods", ccfg.methods, "Methods")->delimiter(',')->check(CLI::IsMember(kMethodNames));
  coverage->add_option("--truth", ccfg.truths, "Truth point(s), comma separated coordinates");
  coverage->add_option("--budget", ccfg.budget, "Quantile evaluations per search (mq / mqmu)");
  coverage->add_option("--n-per-eval", ccfg.n_per_eval, "Null draws per quantile evaluation");

  MaxqCfg mcfg;
  auto* maxq = app.add_subcommand("maxq", "Maximum-quantile decision values");
  add_common(maxq, mcfg.common);
  add_model(maxq, mcfg.model);
  maxq->add_option("--level", mcfg.level, "Quantile level 1 - alpha");
  maxq->add_option("--budget", mcfg.budget, "Quantile evaluations (per mu with --per-mu)");
  maxq->add_option("--n-per-eval", mcfg.n_per_eval, "Null draws per quantile evaluation");
  maxq->add_option("--box-lower", mcfg.box_lower, "Search box lower corner");
  maxq->add_option("--box-upper", mcfg.box_upper, "Search box upper corner");
  maxq->add_flag("--per-mu", mcfg.per_mu, "Optimise over each slice h^T x = mu");
  maxq->add_option("--mu-grid", mcfg.mu_grid, "mu values for --per-mu, comma separated");

  DominanceCfg dcfg;
  auto* dominance = app.add_subcommand("dominance", "Compare the null LLR law with chi-square");
  add_common(dominance, dcfg.common, true);
  add_model(dominance, dcfg.model);
  dominance->add_option("--xstar", dcfg.xstar, "Truth point, comma separated")->required();
  dominance->add_option("--n", dcfg.n, "Null draws");
  dominance->add_option("--dof", dcfg.dof, "Reference chi-square degrees of freedom");
  dominance->add_option("--csv", dcfg.csv_path, "Also write the c,delta_cdf,sigma table here");

  CounterexampleCfg xcfg;
  auto* counter = app.add_subcommand("counterexample", "Monte Carlo checks of the counterexamples");
  add_common(counter, xcfg.common);
  counter->add_option("--check", xcfg.check, "Which check")->check(CLI::IsMember({"mean", "divergence", "coupling"}));
  counter->add_option("--n", xcfg.n, "Draws (per dimension for divergence)");
  counter->add_option("--p-list", xcfg.p_list, "Dimensions for the divergence check");

  CurveCfg qcfg;
  auto* curve = app.add_subcommand("quantile-curve", "Quantiles along x*(t) = (t, t, 1) in the 3D example");
  add_common(curve, qcfg.common, true);
  curve->add_option("--level", qcfg.level, "Quantile level");
  curve->add_option("--t-grid", qcfg.t_grid, "t values in (0, e], comma separated");
  curve->add_option("--n", qcfg.n, "Null draws per t");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*interval) return cmd_interval(icfg);
    if (*coverage) return cmd_coverage(ccfg);
    if (*maxq) return cmd_maxq(mcfg);
    if (*dominance) return cmd_dominance(dcfg);
    if (*counter) return cmd_counterexample(xcfg);
    if (*curve) return cmd_quantile_curve(qcfg);
  } catch (const sb::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kInputError;
}
