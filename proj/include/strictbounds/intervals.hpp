#pragma once

#include <cmath>
#include <string>

#include "llr.hpp"
#include "maxquantile.hpp"
#include "model.hpp"
#include "solver.hpp"
#include "stats.hpp"

namespace strictbounds {

enum class Method { SSB, OSB, MQ, MQmu, Custom, ClosedForm };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::SSB: return "SSB";
    case Method::OSB: return "OSB";
    case Method::MQ: return "MQ";
    case Method::MQmu: return "MQmu";
    case Method::Custom: return "custom";
    case Method::ClosedForm: return "closed-form";
  }
  return "?";
}

/// {mu : lambda(mu, y) <= q(mu)} as [lower, upper]; either side may be infinite.
struct IntervalResult {
  Method method = Method::Custom;
  double alpha = 0.05;
  double lower = kInf;
  double upper = -kInf;
  bool empty = true;
  double q_used = 0.0;  ///< threshold on lambda at mu_hat (per-mu rules) or the rule's scalar value
  bool per_mu = false;
  double s2 = 0.0;
  double mu_hat = 0.0;
  long n_solves = 0;
  double tolerance = 0.0;  ///< endpoint bisection tolerance

  bool bounded() const { return !empty && std::isfinite(lower) && std::isfinite(upper); }

  /// 0 for an empty interval, +inf for a half-unbounded one.
  double length() const {
    if (empty) return 0.0;
    return upper - lower;
  }

  bool contains(double mu, double tol = -1.0) const {
    if (empty) return false;
    if (tol < 0) tol = tolerance;
    return mu >= lower - tol && mu <= upper + tol;
  }
};

struct IntervalOptions {
  double initial_step = 1.0;
  int max_doublings = 60;
  double rel_tol = 1e-8;
};

namespace detail {

/// Largest inside point on one side of mu_hat (dir = +1 right, -1 left) for
/// h(mu) = g(mu) - threshold(mu) <= 0, clipped at the phi(X) bound `limit`.
template <class H>
double find_endpoint(double mu_hat, int dir, double limit, double tol, const IntervalOptions& opt, H&& h) {
  if (dir * (limit - mu_hat) <= 0) return mu_hat;
  double inside = mu_hat;
  double step = opt.initial_step;
  double outside = kInf * dir;
  bool found = false;
  for (int k = 0; k <= opt.max_doublings; ++k) {
    double b = mu_hat + dir * step;
    if (dir * (b - limit) >= 0) {
      if (h(limit) <= 0) return limit;
      outside = limit;
      found = true;
      break;
    }
    if (h(b) > 0) {
      outside = b;
      found = true;
      break;
    }
    inside = b;
    step *= 2.0;
  }
  if (!found) return kInf * dir;
  while (std::abs(outside - inside) > tol) {
    double mid = 0.5 * (inside + outside);
    if (h(mid) <= 0) inside = mid; else outside = mid;
  }
  return inside;
}

}  // namespace detail

/// Functional-space interval: all mu with g(mu) = slice objective - s^2(y)
/// at most the rule's threshold. g is convex with g(mu_hat) = 0, so each
/// endpoint is found by outward expansion and bisection.
inline IntervalResult interval_functional_space(const LlrStatistic& stat, const VectorXd& y, const DecisionRule& rule,
                                                QpSolver& ws, Method method = Method::Custom,
                                                const IntervalOptions& opt = {}) {
  BoundObservation obs(stat, y, ws);
  IntervalResult r;
  r.method = method;
  r.alpha = rule.alpha();
  r.s2 = obs.s2();
  r.mu_hat = obs.mu_hat();
  r.per_mu = rule.per_mu_kind();
  r.tolerance = opt.rel_tol * (1.0 + std::abs(r.mu_hat));
  const double q_hat = rule.threshold(r.mu_hat, r.s2);
  r.q_used = r.per_mu ? q_hat : rule.scalar_value();
  if (!(q_hat >= 0)) {
    r.empty = true;
    r.n_solves = obs.solves();
    return r;
  }
  auto h = [&](double mu) {
    double g = obs.g(mu, ws);
    if (!std::isfinite(g)) return kInf;
    return g - rule.threshold(mu, r.s2);
  };
  auto range = stat.instance().constraints().functional_range(stat.instance().h());
  r.empty = false;
  r.upper = detail::find_endpoint(r.mu_hat, +1, range.second, r.tolerance, opt, h);
  r.lower = detail::find_endpoint(r.mu_hat, -1, range.first, r.tolerance, opt, h);
  r.n_solves = obs.solves();
  return r;
}

inline IntervalResult interval_functional_space(const LlrStatistic& stat, const VectorXd& y, const DecisionRule& rule) {
  QpSolver ws;
  return interval_functional_space(stat, y, rule, ws);
}

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

/// Simultaneous strict bounds: ||y - Kx||^2 <= Q_{chi2_m}(1 - alpha).
inline IntervalResult interval_ssb(const LlrStatistic& stat, const VectorXd& y, double alpha, QpSolver& ws) {
  check_alpha(alpha);
  auto r = interval_functional_space(
      stat, y, DecisionRule::chi2_m(1.0 - alpha, static_cast<int>(stat.instance().m())), ws, Method::SSB);
  r.alpha = alpha;
  return r;
}

/// One-at-a-time strict bounds: lambda <= z^2_{alpha/2}.
inline IntervalResult interval_osb(const LlrStatistic& stat, const VectorXd& y, double alpha, QpSolver& ws) {
  check_alpha(alpha);
  auto r = interval_functional_space(stat, y, DecisionRule::chi2_one(1.0 - alpha), ws, Method::OSB);
  r.alpha = alpha;
  return r;
}

inline void check_rule_level(const DecisionRule& rule, double alpha) {
  check_alpha(alpha);
  if (std::abs(rule.level() - (1.0 - alpha)) > 1e-12) throw std::invalid_argument("rule level must equal 1 - alpha");
}

inline IntervalResult interval_mq(const LlrStatistic& stat, const VectorXd& y, double alpha, const DecisionRule& rule,
                                  QpSolver& ws) {
  check_rule_level(rule, alpha);
  auto r = interval_functional_space(stat, y, rule, ws, Method::MQ);
  r.alpha = alpha;
  return r;
}

inline IntervalResult interval_mqmu(const LlrStatistic& stat, const VectorXd& y, double alpha, const DecisionRule& rule,
                                    QpSolver& ws) {
  check_rule_level(rule, alpha);
  auto r = interval_functional_space(stat, y, rule, ws, Method::MQmu);
  r.alpha = alpha;
  return r;
}

inline IntervalResult interval_ssb(const ProblemInstance& inst, const VectorXd& y, double alpha) {
  LlrStatistic stat(inst);
  QpSolver ws;
  return interval_ssb(stat, y, alpha, ws);
}

inline IntervalResult interval_osb(const ProblemInstance& inst, const VectorXd& y, double alpha) {
  LlrStatistic stat(inst);
  QpSolver ws;
  return interval_osb(stat, y, alpha, ws);
}

inline IntervalResult interval_mq(const ProblemInstance& inst, const VectorXd& y, double alpha, const DecisionRule& rule) {
  LlrStatistic stat(inst);
  QpSolver ws;
  return interval_mq(stat, y, alpha, rule, ws);
}

inline IntervalResult interval_mqmu(const ProblemInstance& inst, const VectorXd& y, double alpha,
                                    const DecisionRule& rule) {
  LlrStatistic stat(inst);
  QpSolver ws;
  return interval_mqmu(stat, y, alpha, rule, ws);
}

/// h^T x_ls +- z_{alpha/2} sqrt(h^T (K^T K)^{-1} h), ignoring constraints.
inline IntervalResult interval_unconstrained_closed_form(const ProblemInstance& inst, const VectorXd& y, double alpha) {
  check_alpha(alpha);
  if (y.size() != inst.m()) throw DimensionError("observation must have length m");
  UnconstrainedLeastSquares ls(inst);
  VectorXd x = ls.estimate(y);
  IntervalResult r;
  r.method = Method::ClosedForm;
  r.alpha = alpha;
  r.empty = false;
  r.mu_hat = inst.h().dot(x);
  r.s2 = (y - inst.K() * x).squaredNorm();
  const double z = upper_normal_cutoff(0.5 * alpha);
  r.q_used = z * z;
  const double half = z * std::sqrt(ls.variance());
  r.lower = r.mu_hat - half;
  r.upper = r.mu_hat + half;
  r.tolerance = 0.0;
  return r;
}

}  // namespace strictbounds
