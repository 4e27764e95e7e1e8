#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "llr.hpp"
#include "model.hpp"
#include "nulldist.hpp"
#include "stats.hpp"

namespace strictbounds {

/// Threshold rule for the test of h^T x = mu: reject when lambda(mu, y) > q(mu).
///
/// Chi2M is the one absolute rule: its cutoff bounds ||y - Kx||^2 itself, so
/// the threshold on lambda is cutoff - s^2(y) (see threshold()).
class DecisionRule {
 public:
  enum class Kind { Scalar, PerMu, Chi2One, Chi2M };

  static DecisionRule scalar(double q, double level, std::string provenance, std::uint64_t seed = 0) {
    check_level(level);
    if (!(q >= 0)) throw std::invalid_argument("decision value must be nonnegative");
    DecisionRule r(Kind::Scalar, level, std::move(provenance), seed);
    r.q_ = q;
    return r;
  }

  /// z^2_{alpha/2} = Q_{chi2_1}(1 - alpha).
  static DecisionRule chi2_one(double level) {
    DecisionRule r(Kind::Chi2One, level, "chi2(1) quantile", 0);
    r.q_ = chi2_quantile(level, 1);
    return r;
  }

  /// Absolute cutoff Q_{chi2_m}(1 - alpha) on ||y - Kx||^2.
  static DecisionRule chi2_m(double level, int m) {
    DecisionRule r(Kind::Chi2M, level, "chi2(" + std::to_string(m) + ") quantile", 0);
    r.q_ = chi2_quantile(level, m);
    r.dof_ = m;
    return r;
  }

  /// Tabulated q(mu). Between grid points the larger neighbour is used; outside
  /// the grid the largest tabulated value.
  static DecisionRule per_mu(std::vector<double> mu_grid, std::vector<double> q_values, double level,
                             std::string provenance, std::uint64_t seed = 0) {
    check_level(level);
    if (mu_grid.empty() || mu_grid.size() != q_values.size())
      throw DimensionError("per-mu rule needs equally long, nonempty mu_grid and q_values");
    for (std::size_t i = 0; i < mu_grid.size(); ++i) {
      if (!(q_values[i] >= 0)) throw std::invalid_argument("decision values must be nonnegative");
      if (i > 0 && !(mu_grid[i] > mu_grid[i - 1])) throw std::invalid_argument("mu_grid must increase strictly");
    }
    DecisionRule r(Kind::PerMu, level, std::move(provenance), seed);
    r.q_ = *std::max_element(q_values.begin(), q_values.end());
    r.mu_grid_ = std::move(mu_grid);
    r.q_values_ = std::move(q_values);
    return r;
  }

  /// q(mu) given by a function (an analytic quantile curve).
  static DecisionRule per_mu_function(std::function<double(double)> f, double level, std::string provenance) {
    check_level(level);
    DecisionRule r(Kind::PerMu, level, std::move(provenance), 0);
    r.fn_ = std::move(f);
    r.q_ = kInf;
    return r;
  }

  Kind kind() const { return kind_; }
  double level() const { return level_; }
  double alpha() const { return 1.0 - level_; }
  const std::string& provenance() const { return provenance_; }
  std::uint64_t seed() const { return seed_; }
  bool absolute() const { return kind_ == Kind::Chi2M; }
  bool per_mu_kind() const { return kind_ == Kind::PerMu; }
  bool is_function() const { return static_cast<bool>(fn_); }
  int dof() const { return dof_; }
  const std::vector<double>& mu_grid() const { return mu_grid_; }
  const std::vector<double>& q_values() const { return q_values_; }

  /// Scalar value of the rule (the absolute cutoff for Chi2M, the cache
  /// maximum for tabulated PerMu, +inf for function rules).
  double scalar_value() const { return q_; }

  /// q(mu) as stored (absolute cutoff for Chi2M).
  double q(double mu) const {
    if (kind_ != Kind::PerMu) return q_;
    if (fn_) return fn_(mu);
    if (mu < mu_grid_.front() || mu > mu_grid_.back()) return q_;
    auto it = std::lower_bound(mu_grid_.begin(), mu_grid_.end(), mu);
    auto i = static_cast<std::size_t>(it - mu_grid_.begin());
    if (mu_grid_[i] == mu) return q_values_[i];
    return std::max(q_values_[i - 1], q_values_[i]);
  }

  /// Threshold on lambda(mu, y) given s^2(y).
  double threshold(double mu, double s2) const { return absolute() ? q_ - s2 : q(mu); }

 private:
  DecisionRule(Kind k, double level, std::string provenance, std::uint64_t seed)
      : kind_(k), level_(level), provenance_(std::move(provenance)), seed_(seed) {}

  static void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("rule level must lie in (0, 1)");
  }

  Kind kind_;
  double level_;
  std::string provenance_;
  std::uint64_t seed_;
  double q_ = 0.0;
  int dof_ = 0;
  std::vector<double> mu_grid_;
  std::vector<double> q_values_;
  std::function<double(double)> fn_;
};

inline const char* to_string(DecisionRule::Kind k) {
  switch (k) {
    case DecisionRule::Kind::Scalar: return "Scalar";
    case DecisionRule::Kind::PerMu: return "PerMu";
    case DecisionRule::Kind::Chi2One: return "Chi2One";
    case DecisionRule::Kind::Chi2M: return "Chi2M";
  }
  return "?";
}

// ---- quantile evaluation ---------------------------------------------------

inline constexpr double kQuantileCiConf = 0.95;

struct QuantileEvaluation {
  VectorXd x;
  double q = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Empirical level-quantile of F_x with its order-statistic CI. Every call
/// with the same `rng` reuses the same noise draws.
inline QuantileEvaluation evaluate_quantile(const LlrStatistic& stat, const VectorXd& x, double level,
                                            std::size_t n, const StreamFamily& rng, unsigned threads = 0) {
  EmpiricalSample s(sample_null_values(stat, ParameterPoint{x}, n, rng, threads));
  QuantileEvaluation e;
  e.x = x;
  e.q = empirical_quantile(s, level);
  auto ci = quantile_order_stat_ci(s, level, kQuantileCiConf);
  e.ci_lo = ci.first;
  e.ci_hi = ci.second;
  return e;
}

struct MaxQuantileOptions {
  int budget = 200;               ///< total quantile evaluations
  std::size_t n_per_eval = 10000;  ///< null draws per evaluation
  unsigned threads = 0;
};

struct MaxQuantileResult {
  double q = 0.0;  ///< best point estimate
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  VectorXd argmax;
  std::vector<QuantileEvaluation> evaluations;
  std::uint64_t seed = 0;
  double level = 0.0;

  /// Scalar rule holding the CI upper endpoint.
  DecisionRule to_rule(std::string provenance = "max-quantile") const {
    return DecisionRule::scalar(ci_hi, level, std::move(provenance), seed);
  }
};

namespace detail {

/// Multistart coordinate pattern search maximising score(u) over [lo, hi].
///
/// `screen` points are scored first; the best of them, followed by `random`
/// points, seed `restarts` local searches that split the remaining budget.
/// Steps start at a quarter of the box width, halve after a sweep without
/// improvement, and stop at 1e-3 of the width. score returns nullopt for
/// points to skip (outside the slice's feasible part); skipped points do not
/// use budget. Repeated points are scored once.
template <class Score>
void pattern_search(const VectorXd& lo, const VectorXd& hi, const std::vector<VectorXd>& screen,
                    const std::vector<VectorXd>& random, int restarts, int budget, Score&& raw_score) {
  const Index d = lo.size();
  const VectorXd width = hi - lo;
  const bool degenerate = d == 0 || width.maxCoeff() <= 0;
  std::map<std::vector<double>, std::optional<double>> memo;
  int used = 0;
  auto score = [&](const VectorXd& u) -> std::optional<double> {
    std::vector<double> key(u.data(), u.data() + u.size());
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    if (used >= budget) return std::nullopt;
    auto f = raw_score(u);
    if (f) ++used;
    memo.emplace(std::move(key), f);
    return f;
  };

  std::vector<std::pair<double, VectorXd>> ranked;
  for (const auto& u : screen) {
    if (used >= budget / 2 && !ranked.empty()) break;
    if (auto f = score(u)) ranked.emplace_back(*f, u);
  }
  if (degenerate) {
    if (ranked.empty() && !random.empty()) score(random.front());
    return;
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<VectorXd> starts;
  for (const auto& r : ranked) {
    if (static_cast<int>(starts.size()) >= restarts) break;
    starts.push_back(r.second);
  }
  for (const auto& u : random) {
    if (static_cast<int>(starts.size()) >= restarts) break;
    starts.push_back(u);
  }

  const int n_starts = static_cast<int>(starts.size());
  for (int r = 0; r < n_starts && used < budget; ++r) {
    const int stop = used + std::max(1, (budget - used) / (n_starts - r));
    VectorXd u = starts[static_cast<std::size_t>(r)];
    auto f0 = score(u);
    if (!f0) continue;
    double best = *f0;
    VectorXd step = 0.25 * width;
    while (used < stop && (step.array() > 1e-3 * width.array()).any()) {
      bool improved = false;
      for (Index j = 0; j < d && used < stop; ++j) {
        if (width[j] <= 0) continue;
        for (int sgn : {+1, -1}) {
          if (used >= stop) break;
          VectorXd c = u;
          c[j] = std::clamp(u[j] + sgn * step[j], lo[j], hi[j]);
          if (c[j] == u[j]) continue;
          auto f = score(c);
          if (!f) continue;
          if (*f > best) {
            best = *f;
            u = c;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
  }
}

inline std::vector<VectorXd> random_points(const VectorXd& lo, const VectorXd& hi, int count, Engine& eng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<VectorXd> out;
  while (static_cast<int>(out.size()) < count) {
    VectorXd u(lo.size());
    for (Index j = 0; j < lo.size(); ++j) u[j] = lo[j] + unif(eng) * (hi[j] - lo[j]);
    out.push_back(u);
  }
  return out;
}

inline int restart_count(int budget) { return std::max(8, budget / 25); }

/// Largest p for which box / slice vertices are enumerated as screening points.
inline constexpr Index kVertexScreenMaxDim = 8;

inline std::vector<VectorXd> box_vertices(const Box& b) {
  const Index p = b.lower.size();
  std::vector<VectorXd> out;
  if (p > kVertexScreenMaxDim) return out;
  for (unsigned long mask = 0; mask < (1ul << p); ++mask) {
    VectorXd v(p);
    for (Index j = 0; j < p; ++j) v[j] = (mask >> j) & 1ul ? b.upper[j] : b.lower[j];
    out.push_back(v);
  }
  return out;
}

/// Vertices of {x in b : h^T x = mu}: intersections of the box edges with the plane.
inline std::vector<VectorXd> slice_vertices(const Box& b, const VectorXd& h, double mu) {
  const Index p = b.lower.size();
  std::vector<VectorXd> out;
  if (p > kVertexScreenMaxDim) return out;
  auto seen = [&](const VectorXd& v) {
    for (const auto& w : out) {
      if ((w - v).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + v.lpNorm<Eigen::Infinity>())) return true;
    }
    return false;
  };
  for (Index j = 0; j < p; ++j) {
    if (h[j] == 0.0) continue;
    for (unsigned long mask = 0; mask < (1ul << (p - 1)); ++mask) {
      VectorXd v(p);
      double rest = 0.0;
      Index bit = 0;
      for (Index i = 0; i < p; ++i) {
        if (i == j) continue;
        v[i] = (mask >> bit++) & 1ul ? b.upper[i] : b.lower[i];
        rest += h[i] * v[i];
      }
      v[j] = (mu - rest) / h[j];
      const double tol = 1e-12 * (1.0 + std::abs(v[j]));
      if (v[j] < b.lower[j] - tol || v[j] > b.upper[j] + tol) continue;
      v[j] = std::clamp(v[j], b.lower[j], b.upper[j]);
      if (!seen(v)) out.push_back(v);
    }
  }
  return out;
}

inline void take_best(MaxQuantileResult& res) {
  res.q = -kInf;
  for (const auto& e : res.evaluations) {
    if (e.q > res.q) {
      res.q = e.q;
      res.ci_lo = e.ci_lo;
      res.ci_hi = e.ci_hi;
      res.argmax = e.x;
    }
  }
}

}  // namespace detail

/// Estimate of sup over search_box of Q_{F_x}(level) by multistart pattern
/// search with common random numbers, after screening the box centre and
/// vertices. search_box must lie inside X.
inline MaxQuantileResult max_quantile(const LlrStatistic& stat, double level, const Box& search_box,
                                      const MaxQuantileOptions& opt, const StreamFamily& rng) {
  const ProblemInstance& inst = stat.instance();
  if (search_box.lower.size() != inst.p() || search_box.upper.size() != inst.p())
    throw DimensionError("search box must have dimension p");
  if (!(search_box.lower.array() <= search_box.upper.array()).all()) throw std::invalid_argument("search box is empty");
  if (opt.budget < 1) throw std::invalid_argument("budget must be >= 1");
  if (!inst.constraints().contains(search_box.lower) || !inst.constraints().contains(search_box.upper))
    throw std::invalid_argument("search box must lie inside X");

  const StreamFamily noise = rng.child(0);
  Engine start_eng = rng.child(1).stream(0);
  MaxQuantileResult res;
  res.seed = rng.seed();
  res.level = level;
  std::vector<VectorXd> screen{0.5 * (search_box.lower + search_box.upper)};
  for (auto& v : detail::box_vertices(search_box)) screen.push_back(std::move(v));
  const int restarts = detail::restart_count(opt.budget);
  auto random = detail::random_points(search_box.lower, search_box.upper, restarts, start_eng);
  detail::pattern_search(search_box.lower, search_box.upper, screen, random, restarts, opt.budget,
                         [&](const VectorXd& x) -> std::optional<double> {
                           res.evaluations.push_back(
                               evaluate_quantile(stat, x, level, opt.n_per_eval, noise, opt.threads));
                           return res.evaluations.back().q;
                         });
  detail::take_best(res);
  return res;
}

struct PerMuResult {
  std::vector<double> mu_grid;  ///< feasible entries only
  std::vector<MaxQuantileResult> per_mu;
  std::vector<double> dropped;  ///< grid values with an empty slice in the box

  DecisionRule to_rule(double level, std::uint64_t seed, std::string provenance = "max-quantile per mu") const {
    std::vector<double> q;
    for (const auto& r : per_mu) q.push_back(r.ci_hi);
    return DecisionRule::per_mu(mu_grid, std::move(q), level, std::move(provenance), seed);
  }
};

/// sup over the slice {h^T x = mu} inside search_box, for each mu in the grid.
/// The slice is parameterised by the free coordinates after eliminating the
/// one with the largest |h_j|; the slice vertices are screened first.
inline PerMuResult max_quantile_per_mu(const LlrStatistic& stat, double level, const std::vector<double>& mu_grid,
                                       const Box& search_box, const MaxQuantileOptions& opt, const StreamFamily& rng) {
  const ProblemInstance& inst = stat.instance();
  const Index p = inst.p();
  if (search_box.lower.size() != p || search_box.upper.size() != p) throw DimensionError("search box must have dimension p");
  if (!(search_box.lower.array() <= search_box.upper.array()).all()) throw std::invalid_argument("search box is empty");
  if (opt.budget < 1) throw std::invalid_argument("budget must be >= 1");
  if (!inst.constraints().contains(search_box.lower) || !inst.constraints().contains(search_box.upper))
    throw std::invalid_argument("search box must lie inside X");
  const VectorXd& h = inst.h();
  Index elim = 0;
  h.cwiseAbs().maxCoeff(&elim);
  std::vector<Index> free;
  for (Index j = 0; j < p; ++j) {
    if (j != elim) free.push_back(j);
  }
  const Index nf = static_cast<Index>(free.size());
  VectorXd lo(nf), hi(nf);
  for (Index k = 0; k < nf; ++k) {
    lo[k] = search_box.lower[free[static_cast<std::size_t>(k)]];
    hi[k] = search_box.upper[free[static_cast<std::size_t>(k)]];
  }
  auto project = [&](const VectorXd& x) {
    VectorXd u(nf);
    for (Index k = 0; k < nf; ++k) u[k] = x[free[static_cast<std::size_t>(k)]];
    return u;
  };
  const ConstraintSet box_set = ConstraintSet::box(search_box.lower, search_box.upper);
  const StreamFamily noise = rng.child(0);
  const int restarts = detail::restart_count(opt.budget);

  PerMuResult out;
  for (std::size_t g = 0; g < mu_grid.size(); ++g) {
    const double mu = mu_grid[g];
    auto feasible = closed_form_slice_point(box_set, h, mu);
    if (!feasible) {
      out.dropped.push_back(mu);
      continue;
    }
    auto lift = [&](const VectorXd& u) -> std::optional<VectorXd> {
      VectorXd x(p);
      double rest = 0.0;
      for (Index k = 0; k < nf; ++k) {
        x[free[static_cast<std::size_t>(k)]] = u[k];
        rest += h[free[static_cast<std::size_t>(k)]] * u[k];
      }
      x[elim] = (mu - rest) / h[elim];
      const double tol = 1e-12 * (1.0 + std::abs(x[elim]));
      if (x[elim] < search_box.lower[elim] - tol || x[elim] > search_box.upper[elim] + tol) return std::nullopt;
      x[elim] = std::clamp(x[elim], search_box.lower[elim], search_box.upper[elim]);
      return x;
    };
    std::vector<VectorXd> screen{project(*feasible)};
    for (const auto& v : detail::slice_vertices(search_box, h, mu)) screen.push_back(project(v));
    Engine start_eng = rng.child(1).stream(g);
    auto random = detail::random_points(lo, hi, restarts, start_eng);

    MaxQuantileResult res;
    res.seed = rng.seed();
    res.level = level;
    detail::pattern_search(lo, hi, screen, random, restarts, opt.budget, [&](const VectorXd& u) -> std::optional<double> {
      auto x = lift(u);
      if (!x) return std::nullopt;
      res.evaluations.push_back(evaluate_quantile(stat, *x, level, opt.n_per_eval, noise, opt.threads));
      return res.evaluations.back().q;
    });
    detail::take_best(res);
    out.mu_grid.push_back(mu);
    out.per_mu.push_back(std::move(res));
  }
  if (out.mu_grid.empty()) throw std::invalid_argument("no mu in the grid has a nonempty slice in the search box");
  return out;
}

struct CcoCertificate {
  double p_hat = 0.0;  ///< estimated P(lambda <= q) at x
  double cp_lo = 0.0;
  double cp_hi = 0.0;
  double sigma = 0.0;  ///< binomial standard error of p_hat
  bool feasible = false;  ///< p_hat <= level
};

/// Monte Carlo check of the chance constraint P(lambda(phi(x), y) <= q) <= level at x.
inline CcoCertificate cco_certify(const LlrStatistic& stat, const ParameterPoint& x, double q, double level,
                                  std::size_t n, const StreamFamily& rng, unsigned threads = 0) {
  if (n < 1) throw SampleTooSmallError("cco_certify needs n >= 1");
  auto v = sample_null_values(stat, x, n, rng, threads);
  long k = 0;
  for (double l : v) k += l <= q ? 1 : 0;
  CcoCertificate c;
  c.p_hat = static_cast<double>(k) / static_cast<double>(n);
  auto cp = clopper_pearson(k, static_cast<long>(n), 0.05);
  c.cp_lo = cp.first;
  c.cp_hi = cp.second;
  c.sigma = std::sqrt(c.p_hat * (1.0 - c.p_hat) / static_cast<double>(n));
  c.feasible = c.p_hat <= level;
  return c;
}

}  // namespace strictbounds
