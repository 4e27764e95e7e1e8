#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "llr.hpp"
#include "model.hpp"
#include "replicates.hpp"
#include "stats.hpp"

namespace strictbounds {

/// Draws of lambda(phi(x), y) with y ~ N(Kx, I).
struct NullSample {
  ParameterPoint x;
  double mu = 0.0;
  EmpiricalSample draws;
  std::uint64_t seed = 0;

  std::size_t n() const { return draws.n(); }
};

/// Per-replicate slice objective and subtrahend at mu = phi(x).
struct NullParts {
  std::vector<double> slice;
  std::vector<double> subtrahend;
};

inline void check_truth(const LlrStatistic& stat, const ParameterPoint& x) {
  if (x.x.size() != stat.instance().p()) throw DimensionError("x must have length p");
  if (!stat.instance().constraints().contains(x.x)) throw std::invalid_argument("truth point x lies outside X");
}

inline NullParts sample_null_parts(const LlrStatistic& stat, const ParameterPoint& x, std::size_t n,
                                   const StreamFamily& rng, unsigned threads = 0) {
  check_truth(stat, x);
  const ProblemInstance& inst = stat.instance();
  const double mu = inst.functional(x.x);
  const VectorXd mean = inst.K() * x.x;
  NullParts out{std::vector<double>(n), std::vector<double>(n)};
  run_replicates(n, rng, threads, [&](std::size_t i, Engine& eng, QpSolver& ws) {
    VectorXd y(inst.m());
    fill_standard_normal(eng, y);
    y += mean;
    LlrParts p = stat.evaluate_parts(mu, y, ws);
    if (!std::isfinite(p.slice)) throw NumericalError("slice through a point of X reported empty");
    out.slice[i] = p.slice;
    out.subtrahend[i] = p.subtrahend;
  });
  return out;
}

inline std::vector<double> sample_null_values(const LlrStatistic& stat, const ParameterPoint& x, std::size_t n,
                                              const StreamFamily& rng, unsigned threads = 0) {
  NullParts parts = sample_null_parts(stat, x, n, rng, threads);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::max(0.0, parts.slice[i] - parts.subtrahend[i]);
  return v;
}

/// n i.i.d. draws from F_x. The same seed gives the same noise for every x.
inline NullSample sample_null(const LlrStatistic& stat, const ParameterPoint& x, std::size_t n,
                              const StreamFamily& rng, unsigned threads = 0) {
  if (n < 1) throw SampleTooSmallError("sample_null needs n >= 1");
  auto v = sample_null_values(stat, x, n, rng, threads);
  return NullSample{x, stat.instance().functional(x.x), EmpiricalSample(std::move(v)), rng.seed()};
}

// ---- 1D closed forms ----------------------------------------------------

/// CDF of lambda(mu, y) for y ~ N(mu, 1), mu >= 0, in the model y = x + eps, x >= 0.
inline double cdf_1d_constrained(double mu, double c) {
  if (!(mu >= 0) || !(c >= 0)) throw std::invalid_argument("cdf_1d_constrained: mu and c must be nonnegative");
  if (std::isinf(c)) return 1.0;
  if (mu == 0.0) return 0.5 * (1.0 + chi2_cdf(c, 1));
  if (c < mu * mu) return chi2_cdf(c, 1);
  return normal_cdf(std::sqrt(c)) - normal_cdf((-mu * mu - c) / (2.0 * mu));
}

/// Inverse of cdf_1d_constrained in c.
inline double quantile_1d_constrained(double mu, double level) {
  if (!(mu >= 0)) throw std::invalid_argument("quantile_1d_constrained: mu must be nonnegative");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("quantile_1d_constrained: level must lie in (0, 1)");
  if (mu == 0.0) return level <= 0.5 ? 0.0 : chi2_quantile(2.0 * level - 1.0, 1);
  if (level < chi2_cdf(mu * mu, 1)) return chi2_quantile(level, 1);
  double lo = mu * mu, hi = std::max(1.0, 2.0 * lo);
  while (cdf_1d_constrained(mu, hi) < level) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1e-10 * std::max(1.0, hi)) {
    double mid = 0.5 * (lo + hi);
    if (cdf_1d_constrained(mu, mid) < level) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ---- dominance diagnostic ---------------------------------------------------

/// Reference law for the diagnostic; currently chi-square with k dof.
struct ChiSquareReference {
  int dof = 1;
  double cdf(double c) const { return chi2_cdf(c, dof); }
};

enum class DominanceVerdict { Dominated, NotDominated };

inline const char* to_string(DominanceVerdict v) {
  return v == DominanceVerdict::Dominated ? "Dominated" : "NotDominated";
}

struct DominanceRow {
  double c;
  double delta_cdf;
  double sigma;
};

struct DominanceReport {
  std::vector<DominanceRow> rows;
  DominanceVerdict verdict = DominanceVerdict::Dominated;
  /// Grid values c with delta_cdf < -3 sigma.
  std::vector<double> violations;
  double min_z = 0.0;  ///< smallest delta_cdf / sigma on the grid

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "c,delta_cdf,sigma\n";
    for (const auto& r : rows) os << r.c << ',' << r.delta_cdf << ',' << r.sigma << '\n';
    return os.str();
  }
};

inline constexpr std::size_t kDominanceGridSize = 512;
inline constexpr std::size_t kDominanceMinSample = 10000;

/// Compares F_hat (the sample) with F_ref on a log grid. The sample is
/// dominated by the reference when F_hat >= F_ref, checked pointwise with a
/// 3 sigma binomial band, sigma = sqrt(F_ref (1 - F_ref) / n).
inline DominanceReport dominance_diagnostic(const EmpiricalSample& s, const ChiSquareReference& ref = {}) {
  if (s.n() < kDominanceMinSample) throw SampleTooSmallError("dominance_diagnostic needs n >= 10^4");
  const double lo = 1e-4;
  const double hi = std::max(s.values().back() * 1.05, 2.0 * lo);
  const double n = static_cast<double>(s.n());
  DominanceReport rep;
  rep.rows.reserve(kDominanceGridSize);
  rep.min_z = kInf;
  for (std::size_t i = 0; i < kDominanceGridSize; ++i) {
    double t = static_cast<double>(i) / static_cast<double>(kDominanceGridSize - 1);
    double c = lo * std::pow(hi / lo, t);
    double fr = ref.cdf(c);
    double sigma = std::sqrt(fr * (1.0 - fr) / n);
    double delta = s.cdf(c) - fr;
    rep.rows.push_back({c, delta, sigma});
    if (sigma > 0) rep.min_z = std::min(rep.min_z, delta / sigma);
    if (delta < -3.0 * sigma) rep.violations.push_back(c);
  }
  rep.verdict = rep.violations.empty() ? DominanceVerdict::Dominated : DominanceVerdict::NotDominated;
  return rep;
}

inline DominanceReport dominance_diagnostic(const NullSample& s, const ChiSquareReference& ref = {}) {
  return dominance_diagnostic(s.draws, ref);
}

/// Sample mean of the draws and its standard error.
inline std::pair<double, double> mean_estimate(const NullSample& s) {
  if (s.n() < kDominanceMinSample) throw SampleTooSmallError("mean_estimate needs n >= 10^4");
  return mean_and_se(s.draws.values());
}

}  // namespace strictbounds
