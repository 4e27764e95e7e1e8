#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "intervals.hpp"
#include "llr.hpp"
#include "maxquantile.hpp"
#include "model.hpp"
#include "nulldist.hpp"
#include "replicates.hpp"
#include "stats.hpp"

namespace strictbounds {

/// How MQ / MQmu rules are computed for a scenario.
struct RuleSettings {
  std::optional<Box> search_box;  ///< required for MQ / MQmu unless analytic_1d
  std::vector<double> mu_grid;
  MaxQuantileOptions options{40, 10000, 0};
  bool analytic_1d = false;  ///< MQmu from the closed-form 1D quantile curve
};

struct Scenario {
  std::string name = "custom";
  ProblemInstance inst;
  std::vector<ParameterPoint> truths;
  std::vector<double> alpha_levels;
  std::size_t reps = 10000;
  std::vector<Method> methods;
  RuleSettings rules;
};

namespace presets {

inline std::vector<double> arange(double lo, double hi, double step) {
  std::vector<double> v;
  for (int i = 0;; ++i) {
    double x = lo + i * step;
    if (x > hi + 1e-9 * step) break;
    v.push_back(std::abs(x) < 1e-12 ? 0.0 : x);
  }
  return v;
}

inline ParameterPoint pt(std::initializer_list<double> v) {
  VectorXd x(static_cast<Index>(v.size()));
  Index i = 0;
  for (double c : v) x[i++] = c;
  return {x};
}

inline Box cube(Index p, double lo, double hi) { return Box{VectorXd::Constant(p, lo), VectorXd::Constant(p, hi)}; }

inline ProblemInstance one_dim() {
  return ProblemInstance(MatrixXd::Identity(1, 1), VectorXd::Ones(1), ConstraintSet::nonnegative(1));
}

inline ProblemInstance two_dim() {
  VectorXd h(2);
  h << 1, -1;
  return ProblemInstance(MatrixXd::Identity(2, 2), h, ConstraintSet::nonnegative(2));
}

inline ProblemInstance three_dim() {
  VectorXd h(3);
  h << 1, 1, -1;
  return ProblemInstance(MatrixXd::Identity(3, 3), h, ConstraintSet::nonnegative(3));
}

inline ProblemInstance box_2d() {
  VectorXd h(2);
  h << 1, -1;
  return ProblemInstance(MatrixXd::Identity(2, 2), h, ConstraintSet::box(VectorXd::Zero(2), VectorXd::Ones(2)));
}

/// K = I_p, h = (1, ..., 1, -1), orthant.
inline ProblemInstance dimension_family(Index p) {
  if (p < 3) throw std::invalid_argument("dimension family needs p >= 3");
  VectorXd h = VectorXd::Ones(p);
  h[p - 1] = -1.0;
  return ProblemInstance(MatrixXd::Identity(p, p), h, ConstraintSet::nonnegative(p));
}

inline Scenario oneD() {
  Scenario s{"oneD", one_dim(), {}, {0.05}, 100000, {Method::SSB, Method::OSB, Method::MQmu}, {}};
  for (double x : {0.0, 0.125, 0.25, 0.5, 1.0, 2.0}) s.truths.push_back(pt({x}));
  s.rules.analytic_1d = true;
  return s;
}

/// The third truth (0.2, 0.6) is off the mu = 0 slice; its value is our choice.
inline Scenario twoD() {
  Scenario s{"twoD", two_dim(), {pt({0, 0}), pt({0.33, 0.33}), pt({0.2, 0.6})}, {0.05}, 50000,
             {Method::SSB, Method::OSB, Method::MQ, Method::MQmu}, {}};
  s.rules.search_box = cube(2, 0.0, 3.0);
  s.rules.mu_grid = arange(-3.0, 3.0, 0.25);
  return s;
}

inline Scenario threeD(double alpha = 0.32) {
  Scenario s{alpha == 0.32 ? "threeD" : "threeD95", three_dim(), {pt({0, 0, 0}), pt({0, 0, 1})}, {alpha}, 50000,
             {Method::SSB, Method::OSB, Method::MQ, Method::MQmu}, {}};
  s.rules.search_box = cube(3, 0.0, 3.0);
  s.rules.mu_grid = arange(-3.0, 4.0, 0.5);
  return s;
}

/// twoD with X = [0, 1]^2. Truths mirror twoD; they are our choice.
inline Scenario box() {
  Scenario s{"box", box_2d(), {pt({0, 0}), pt({0.33, 0.33}), pt({0.2, 0.6})}, {0.05}, 50000,
             {Method::SSB, Method::OSB, Method::MQ, Method::MQmu}, {}};
  s.rules.search_box = cube(2, 0.0, 1.0);
  s.rules.mu_grid = arange(-1.0, 1.0, 0.1);
  return s;
}

inline std::vector<std::string> names() { return {"oneD", "twoD", "threeD", "threeD95", "box"}; }

inline Scenario by_name(const std::string& n) {
  if (n == "oneD") return oneD();
  if (n == "twoD") return twoD();
  if (n == "threeD") return threeD(0.32);
  if (n == "threeD95") return threeD(0.05);
  if (n == "box") return box();
  throw std::invalid_argument("unknown preset '" + n + "'");
}

}  // namespace presets

/// Default MQ search box: the box itself for Box constraints, [0, 3]^p for the orthant.
inline std::optional<Box> default_search_box(const ProblemInstance& inst) {
  switch (inst.constraints().kind()) {
    case ConstraintSet::Kind::Box: return inst.constraints().as_box();
    case ConstraintSet::Kind::NonNegativeOrthant: return presets::cube(inst.p(), 0.0, 3.0);
    case ConstraintSet::Kind::LinearInequalities: return std::nullopt;
  }
  return std::nullopt;
}

/// MQ and MQmu rules for one level.
struct RuleSet {
  std::optional<DecisionRule> mq;
  std::optional<DecisionRule> mqmu;
};

inline bool uses(const Scenario& sc, Method m) {
  for (Method x : sc.methods) {
    if (x == m) return true;
  }
  return false;
}

inline RuleSet compute_rules(const Scenario& sc, const LlrStatistic& stat, double alpha, const StreamFamily& rng) {
  RuleSet rs;
  const double level = 1.0 - alpha;
  const bool need_mq = uses(sc, Method::MQ);
  const bool need_mqmu = uses(sc, Method::MQmu);
  if (need_mqmu && sc.rules.analytic_1d) {
    rs.mqmu = DecisionRule::per_mu_function(
        [level](double mu) { return mu < 0 ? 0.0 : quantile_1d_constrained(mu, level); }, level,
        "analytic 1D quantile");
  }
  if ((need_mq || (need_mqmu && !rs.mqmu)) && !sc.rules.search_box)
    throw std::invalid_argument("MQ / MQmu rules need a search box for scenario " + sc.name);
  if (need_mq) rs.mq = max_quantile(stat, level, *sc.rules.search_box, sc.rules.options, rng.child(1)).to_rule();
  if (need_mqmu && !rs.mqmu) {
    if (sc.rules.mu_grid.empty()) throw std::invalid_argument("MQmu rule needs a mu grid");
    rs.mqmu = max_quantile_per_mu(stat, level, sc.rules.mu_grid, *sc.rules.search_box, sc.rules.options, rng.child(2))
                  .to_rule(level, rng.seed());
  }
  return rs;
}

struct CoverageRow {
  std::size_t truth_index = 0;
  VectorXd truth;
  Method method = Method::OSB;
  double alpha = 0.05;
  long covered = 0;
  long reps = 0;
  double coverage = 0.0;
  double cov_lo = 0.0;
  double cov_hi = 1.0;
  double mean_len = 0.0;  ///< over bounded intervals, empty ones count as 0
  double len_se = 0.0;
  long empty_count = 0;
  long unbounded_count = 0;
  long failure_count = 0;  ///< replicates where the method threw; counted as not covered
  std::uint64_t seed = 0;

  /// Clopper-Pearson half width.
  double cp_half_width() const { return 0.5 * (cov_hi - cov_lo); }
};

struct CoverageReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<CoverageRow> rows;
  std::vector<std::pair<double, RuleSet>> rules;  ///< per alpha

  long total_failures() const {
    long f = 0;
    for (const auto& r : rows) f += r.failure_count;
    return f;
  }

  const CoverageRow& row(std::size_t truth, Method m, double alpha) const;

  std::string to_csv() const;
};

inline std::string format_truth(const VectorXd& x) {
  std::ostringstream os;
  os.precision(17);
  for (Index i = 0; i < x.size(); ++i) os << (i ? ";" : "") << x[i];
  return os.str();
}

inline std::string CoverageReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "truth,method,alpha,coverage,cov_lo,cov_hi,mean_len,len_se,empty_count,reps,seed\n";
  for (const auto& r : rows) {
    os << format_truth(r.truth) << ',' << to_string(r.method) << ',' << r.alpha << ',' << r.coverage << ',' << r.cov_lo
       << ',' << r.cov_hi << ',' << r.mean_len << ',' << r.len_se << ',' << r.empty_count << ',' << r.reps << ','
       << r.seed << '\n';
  }
  return os.str();
}

inline const CoverageRow& CoverageReport::row(std::size_t truth, Method m, double alpha) const {
  for (const auto& r : rows) {
    if (r.truth_index == truth && r.method == m && std::abs(r.alpha - alpha) < 1e-12) return r;
  }
  throw std::out_of_range("no coverage row for that truth / method / alpha");
}

/// Called once per replicate with every method's interval; may run on
/// worker threads concurrently.
using ReplicateObserver =
    std::function<void(std::size_t truth, std::size_t rep, const VectorXd& y, const std::vector<IntervalResult>&)>;

struct CoverageOptions {
  unsigned threads = 0;
  ReplicateObserver observer;
};

/// Monte Carlo coverage and length of every method at every truth and level.
/// Replicate r at truth t uses the same noise for all methods and levels, and
/// results do not depend on the thread count.
inline CoverageReport run_coverage(const Scenario& sc, const StreamFamily& rng, const CoverageOptions& opt = {}) {
  if (sc.truths.empty() || sc.methods.empty() || sc.alpha_levels.empty() || sc.reps < 1)
    throw std::invalid_argument("scenario needs truths, methods, alpha levels and reps >= 1");
  const LlrStatistic stat(sc.inst);
  for (const auto& t : sc.truths) check_truth(stat, t);

  CoverageReport rep;
  rep.scenario = sc.name;
  rep.seed = rng.seed();
  for (std::size_t a = 0; a < sc.alpha_levels.size(); ++a)
    rep.rules.emplace_back(sc.alpha_levels[a], compute_rules(sc, stat, sc.alpha_levels[a], rng.child(100 + a)));

  const std::size_t n_methods = sc.methods.size() * sc.alpha_levels.size();
  for (std::size_t t = 0; t < sc.truths.size(); ++t) {
    const VectorXd& x = sc.truths[t].x;
    const double mu_star = sc.inst.functional(x);
    const VectorXd mean = sc.inst.K() * x;
    // Per replicate and method: 0 = missed, 1 = covered; length; flags.
    std::vector<char> covered(sc.reps * n_methods, 0), empty(sc.reps * n_methods, 0), failed(sc.reps * n_methods, 0);
    std::vector<double> length(sc.reps * n_methods, 0.0);
    const StreamFamily noise = rng.child(1000 + t);
    run_replicates(sc.reps, noise, opt.threads, [&](std::size_t i, Engine& eng, QpSolver& ws) {
      VectorXd y(sc.inst.m());
      fill_standard_normal(eng, y);
      y += mean;
      std::vector<IntervalResult> results;
      results.reserve(n_methods);
      for (std::size_t a = 0; a < sc.alpha_levels.size(); ++a) {
        const double alpha = sc.alpha_levels[a];
        const RuleSet& rs = rep.rules[a].second;
        for (std::size_t k = 0; k < sc.methods.size(); ++k) {
          const std::size_t slot = i * n_methods + a * sc.methods.size() + k;
          IntervalResult r;
          try {
            switch (sc.methods[k]) {
              case Method::SSB: r = interval_ssb(stat, y, alpha, ws); break;
              case Method::OSB: r = interval_osb(stat, y, alpha, ws); break;
              case Method::MQ: r = interval_mq(stat, y, alpha, *rs.mq, ws); break;
              case Method::MQmu: r = interval_mqmu(stat, y, alpha, *rs.mqmu, ws); break;
              default: throw std::invalid_argument("unsupported method in coverage run");
            }
          } catch (const std::exception&) {
            failed[slot] = 1;
            r = IntervalResult{};
            r.method = sc.methods[k];
            r.alpha = alpha;
            results.push_back(r);
            continue;
          }
          covered[slot] = r.contains(mu_star) ? 1 : 0;
          empty[slot] = r.empty ? 1 : 0;
          length[slot] = r.length();
          results.push_back(std::move(r));
        }
      }
      if (opt.observer) opt.observer(t, i, y, results);
    });

    for (std::size_t a = 0; a < sc.alpha_levels.size(); ++a) {
      for (std::size_t k = 0; k < sc.methods.size(); ++k) {
        CoverageRow row;
        row.truth_index = t;
        row.truth = x;
        row.method = sc.methods[k];
        row.alpha = sc.alpha_levels[a];
        row.reps = static_cast<long>(sc.reps);
        row.seed = noise.seed();
        double sum = 0.0, sum_sq = 0.0;
        long n_len = 0;
        for (std::size_t i = 0; i < sc.reps; ++i) {
          const std::size_t slot = i * n_methods + a * sc.methods.size() + k;
          row.covered += covered[slot];
          row.empty_count += empty[slot];
          row.failure_count += failed[slot];
          if (failed[slot]) continue;
          if (!std::isfinite(length[slot])) {
            ++row.unbounded_count;
            continue;
          }
          sum += length[slot];
          sum_sq += length[slot] * length[slot];
          ++n_len;
        }
        row.coverage = static_cast<double>(row.covered) / static_cast<double>(row.reps);
        auto cp = clopper_pearson(row.covered, row.reps, 0.05);
        row.cov_lo = cp.first;
        row.cov_hi = cp.second;
        if (n_len > 0) {
          row.mean_len = sum / static_cast<double>(n_len);
          double var = n_len > 1 ? (sum_sq - n_len * row.mean_len * row.mean_len) / static_cast<double>(n_len - 1) : 0.0;
          row.len_se = std::sqrt(std::max(0.0, var) / static_cast<double>(n_len));
        } else {
          row.mean_len = std::numeric_limits<double>::quiet_NaN();
          row.len_se = std::numeric_limits<double>::quiet_NaN();
        }
        rep.rows.push_back(row);
      }
    }
  }
  return rep;
}

// ---- counterexample checks ---------------------------------------------------

struct MeanCheck {
  double mean = 0.0;
  double se = 0.0;
  double target = 0.0;
  /// |mean - target| <= 4 se
  bool within() const { return std::abs(mean - target) <= 4.0 * se; }
};

struct CounterexampleMeanReport {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  MeanCheck slice;    ///< E[min over the slice], target 13/6
  MeanCheck orthant;  ///< E[min over the orthant], target 1 + 2 Phi(-1) - phi(-1)
  MeanCheck llr;      ///< E[lambda], target their difference
  /// E[lambda] exceeds E[chi2_1] = 1 by at least 4 se.
  bool refuted() const { return llr.mean - 1.0 >= 4.0 * llr.se; }
};

inline double slice_mean_target() { return 13.0 / 6.0; }
inline double orthant_mean_target() { return 1.0 + 2.0 * normal_cdf(-1.0) - normal_pdf(-1.0); }

/// Means of the two objectives and of lambda at x* = (0, 0, 1) in the 3D example.
inline CounterexampleMeanReport run_counterexample_mean(std::size_t n, const StreamFamily& rng, unsigned threads = 0) {
  if (n < 2) throw SampleTooSmallError("run_counterexample_mean needs n >= 2");
  LlrStatistic stat(presets::three_dim());
  NullParts parts = sample_null_parts(stat, presets::pt({0, 0, 1}), n, rng, threads);
  std::vector<double> llr(n);
  for (std::size_t i = 0; i < n; ++i) llr[i] = parts.slice[i] - parts.subtrahend[i];
  CounterexampleMeanReport rep;
  rep.n = n;
  rep.seed = rng.seed();
  auto set = [](MeanCheck& m, const std::vector<double>& v, double target) {
    auto ms = mean_and_se(v);
    m.mean = ms.first;
    m.se = ms.second;
    m.target = target;
  };
  set(rep.slice, parts.slice, slice_mean_target());
  set(rep.orthant, parts.subtrahend, orthant_mean_target());
  set(rep.llr, llr, slice_mean_target() - orthant_mean_target());
  return rep;
}

struct CouplingReport {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  long violations = 0;     ///< draws with lambda(0, y) > (y1 - y2)^2 / 2 + tol
  double max_excess = 0.0;  ///< largest lambda(0, y) - (y1 - y2)^2 / 2
  double tol = 1e-10;
};

/// Checks lambda(0, y) <= (y1 - y2)^2 / 2 in the 2D example on n draws
/// y ~ N(0, scale^2 I), with lambda from the generic solver.
inline CouplingReport run_coupling_check(std::size_t n, const StreamFamily& rng, unsigned threads = 0,
                                         double scale = 3.0, double tol = 1e-10) {
  LlrStatistic stat(presets::two_dim(), FastPathPolicy::Off);
  std::vector<double> excess(n);
  run_replicates(n, rng, threads, [&](std::size_t i, Engine& eng, QpSolver& ws) {
    VectorXd y(2);
    fill_standard_normal(eng, y);
    y *= scale;
    auto l = stat.evaluate(0.0, y, ws);
    if (!l) throw NumericalError("2D slice at mu = 0 reported empty");
    excess[i] = *l - 0.5 * (y[0] - y[1]) * (y[0] - y[1]);
  });
  CouplingReport rep;
  rep.n = n;
  rep.seed = rng.seed();
  rep.tol = tol;
  rep.max_excess = -kInf;
  for (double e : excess) {
    rep.max_excess = std::max(rep.max_excess, e);
    if (e > tol) ++rep.violations;
  }
  return rep;
}

struct DivergenceRow {
  Index p = 0;
  double mean = 0.0;
  double se = 0.0;
};

struct DivergenceReport {
  std::vector<DivergenceRow> rows;
  std::uint64_t seed = 0;

  /// Every consecutive mean increases by more than 4 combined se.
  bool strictly_increasing() const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      double se = std::hypot(rows[i].se, rows[i - 1].se);
      if (!(rows[i].mean - rows[i - 1].mean > 4.0 * se)) return false;
    }
    return true;
  }

  bool endpoints_diverge() const {
    if (rows.size() < 2) return false;
    const auto& a = rows.front();
    const auto& b = rows.back();
    return b.mean > a.mean + 4.0 * std::hypot(a.se, b.se);
  }

  bool diverges() const { return strictly_increasing() && endpoints_diverge(); }
};

/// Mean of lambda(phi(x*), y) for K = I_p, h = (1, ..., 1, -1), x* = (0, ..., 0, 1).
inline DivergenceReport run_dimension_divergence(const std::vector<Index>& p_list, std::size_t n,
                                                 const StreamFamily& rng, unsigned threads = 0) {
  DivergenceReport rep;
  rep.seed = rng.seed();
  for (Index p : p_list) {
    LlrStatistic stat(presets::dimension_family(p));
    VectorXd x = VectorXd::Zero(p);
    x[p - 1] = 1.0;
    auto v = sample_null_values(stat, ParameterPoint{x}, n, rng, threads);
    auto ms = mean_and_se(v);
    rep.rows.push_back({p, ms.first, ms.second});
  }
  return rep;
}

struct QuantileCurveRow {
  double t = 0.0;
  double q = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool exceeds = false;  ///< ci_lo > Q_{chi2_1}(level)
};

struct QuantileCurveReport {
  double level = 0.0;
  double chi2_cutoff = 0.0;
  std::uint64_t seed = 0;
  std::vector<QuantileCurveRow> rows;

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "t,q,ci_lo,ci_hi,exceeds_chi2\n";
    for (const auto& r : rows) os << r.t << ',' << r.q << ',' << r.ci_lo << ',' << r.ci_hi << ',' << r.exceeds << '\n';
    return os.str();
  }
};

/// Level-quantile of lambda along x*(t) = (t, t, 1) in the 3D example.
inline QuantileCurveReport run_quantile_curve(double level, const std::vector<double>& t_grid, std::size_t n,
                                              const StreamFamily& rng, unsigned threads = 0) {
  QuantileCurveReport rep;
  rep.level = level;
  rep.chi2_cutoff = chi2_quantile(level, 1);
  rep.seed = rng.seed();
  LlrStatistic stat(presets::three_dim());
  for (double t : t_grid) {
    if (!(t > 0.0 && t <= std::exp(1.0) + 1e-12)) throw std::invalid_argument("t must lie in (0, e]");
    VectorXd x(3);
    x << t, t, 1.0;
    auto e = evaluate_quantile(stat, x, level, n, rng, threads);
    rep.rows.push_back({t, e.q, e.ci_lo, e.ci_hi, e.ci_lo > rep.chi2_cutoff});
  }
  return rep;
}

}  // namespace strictbounds
