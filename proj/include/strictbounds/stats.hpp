#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace strictbounds {

// Lower-tail convention throughout: normal_quantile(p) and chi2_quantile(p, k)
// return Q with CDF(Q) = p. An upper-tail cutoff z_a (P(Z > z_a) = a) is
// normal_quantile(1 - a), available as upper_normal_cutoff(a).

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Inverse standard normal CDF: Acklam's rational approximation followed by
/// two Halley steps against std::erfc.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int i = 0; i < 2; ++i) {
    // Work with the smaller tail for accuracy.
    double e = x < 0 ? normal_cdf(x) - p : (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2);
    double u = e / normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

/// z_a with P(Z > z_a) = a.
inline double upper_normal_cutoff(double a) {
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("upper_normal_cutoff: a must lie in (0, 1)");
  return -normal_quantile(a);
}

/// Regularized lower incomplete gamma P(a, x).
inline double regularized_gamma_p(double a, double x) {
  if (!(a > 0)) throw std::invalid_argument("regularized_gamma_p: a must be positive");
  if (x <= 0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a, sum = term;
    for (int n = 1; n < 10000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return std::min(1.0, sum * std::exp(log_prefix));
  }
  // Lentz continued fraction for Q(a, x).
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int n = 1; n < 10000; ++n) {
    double an = -n * (n - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_prefix) * h);
}

inline void check_dof(int k) {
  if (k < 1) throw std::invalid_argument("chi-square degrees of freedom must be >= 1");
}

inline double chi2_cdf(double c, int k) {
  check_dof(k);
  if (std::isnan(c)) throw std::invalid_argument("chi2_cdf: NaN argument");
  if (c <= 0) return 0.0;
  if (k == 1) return std::erf(std::sqrt(0.5 * c));
  if (k == 2) return -std::expm1(-0.5 * c);
  return regularized_gamma_p(0.5 * k, 0.5 * c);
}

inline double chi2_pdf(double c, int k) {
  if (c <= 0) return 0.0;
  double a = 0.5 * k;
  return std::exp((a - 1.0) * std::log(c) - 0.5 * c - a * std::numbers::ln2 - std::lgamma(a));
}

/// Lower-tail chi-square quantile. Closed forms for k = 1, 2; otherwise
/// Newton iteration kept inside a shrinking bisection bracket.
inline double chi2_quantile(double p, int k) {
  check_dof(k);
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("chi2_quantile: p must lie in (0, 1)");
  if (k == 1) {
    double z = normal_quantile(0.5 * (1.0 - p));
    return z * z;
  }
  if (k == 2) return -2.0 * std::log1p(-p);
  double lo = 0.0, hi = std::max(1.0, static_cast<double>(k));
  while (chi2_cdf(hi, k) < p) {
    lo = hi;
    hi *= 2.0;
  }
  // Wilson-Hilferty start.
  double z = normal_quantile(p);
  double v = 2.0 / (9.0 * k);
  double x = k * std::pow(std::max(1e-3, 1.0 - v + z * std::sqrt(v)), 3);
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double f = chi2_cdf(x, k) - p;
    if (f < 0) lo = x; else hi = x;
    if (f == 0.0 || hi - lo <= 1e-15 * std::max(1.0, hi)) break;
    double fp = chi2_pdf(x, k);
    double nx = fp > 0 ? x - f / fp : 0.5 * (lo + hi);
    if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
    if (std::abs(nx - x) <= 1e-15 * std::max(1.0, x)) {
      x = nx;
      break;
    }
    x = nx;
  }
  return x;
}

/// Sorted sample of Monte Carlo draws.
class EmpiricalSample {
 public:
  explicit EmpiricalSample(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw SampleTooSmallError("empirical sample must be nonempty");
    for (double v : values_) {
      if (std::isnan(v)) throw std::invalid_argument("empirical sample contains NaN");
    }
    std::sort(values_.begin(), values_.end());
  }

  const std::vector<double>& values() const { return values_; }
  std::size_t n() const { return values_.size(); }

  /// Fraction of values <= c.
  double cdf(double c) const {
    auto it = std::upper_bound(values_.begin(), values_.end(), c);
    return static_cast<double>(it - values_.begin()) / static_cast<double>(n());
  }

  /// 1-based order statistic.
  double order_stat(std::size_t i) const { return values_.at(i - 1); }

 private:
  std::vector<double> values_;
};

/// Order statistic ceil(p n), 1-based.
inline double empirical_quantile(const EmpiricalSample& s, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("empirical_quantile: p must lie in (0, 1)");
  const double n = static_cast<double>(s.n());
  auto idx = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  idx = std::clamp<std::size_t>(idx, 1, s.n());
  return s.order_stat(idx);
}

/// Sample mean and its standard error.
inline std::pair<double, double> mean_and_se(const std::vector<double>& v) {
  if (v.size() < 2) throw SampleTooSmallError("mean_and_se needs at least two values");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  double var = ss / static_cast<double>(v.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

namespace detail {

/// log P(Bin(n, q) = j)
inline double binom_log_pmf(long n, long j, double q) {
  return std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + j * std::log(q) +
         (n - j) * std::log1p(-q);
}

/// Sums pmf from j0 in direction step (+1 or -1) until terms stop mattering.
inline double binom_tail_from(long n, long j0, int step, double q) {
  double term = std::exp(binom_log_pmf(n, j0, q));
  double sum = term;
  const double ratio = q / (1.0 - q);
  for (long j = j0; ; ) {
    long nj = j + step;
    if (nj < 0 || nj > n) break;
    term = step > 0 ? term * ratio * static_cast<double>(n - j) / static_cast<double>(j + 1)
                    : term / ratio * static_cast<double>(j) / static_cast<double>(n - j + 1);
    sum += term;
    j = nj;
    if (term <= sum * 1e-17) break;
  }
  return sum;
}

}  // namespace detail

/// P(Bin(n, q) >= k), exact tail sum started at k and walking away from the
/// mode, so only the non-negligible terms are visited.
inline double binom_upper_tail(long n, long k, double q) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (q <= 0.0) return 0.0;
  if (q >= 1.0) return 1.0;
  const double mode = (n + 1) * q;
  if (static_cast<double>(k) >= mode) return std::min(1.0, detail::binom_tail_from(n, k, +1, q));
  return std::max(0.0, 1.0 - detail::binom_tail_from(n, k - 1, -1, q));
}

/// P(Bin(n, q) <= k)
inline double binom_cdf(long n, long k, double q) { return 1.0 - binom_upper_tail(n, k + 1, q); }

/// Exact equal-tailed (1 - alpha) interval for a binomial proportion.
inline std::pair<double, double> clopper_pearson(long k, long n, double alpha) {
  if (n < 1 || k < 0 || k > n) throw std::invalid_argument("clopper_pearson: need 0 <= k <= n, n >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("clopper_pearson: alpha must lie in (0, 1)");
  const double half = 0.5 * alpha;
  auto solve = [&](auto&& f, double target) {  // f increasing in q
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
      double mid = 0.5 * (lo + hi);
      if (f(mid) < target) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  double lower = k == 0 ? 0.0 : solve([&](double q) { return binom_upper_tail(n, k, q); }, half);
  double upper = k == n ? 1.0 : solve([&](double q) { return binom_upper_tail(n, k + 1, q); }, 1.0 - half);
  return {lower, upper};
}

/// Distribution-free interval [X_(l), X_(u)] for the p-quantile, with
/// l the largest and u the smallest index such that each tail has
/// probability at most (1 - conf) / 2 under Bin(n, p).
inline std::pair<double, double> quantile_order_stat_ci(const EmpiricalSample& s, double p, double conf) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile_order_stat_ci: p must lie in (0, 1)");
  if (!(conf > 0.0 && conf < 1.0)) throw std::invalid_argument("quantile_order_stat_ci: conf must lie in (0, 1)");
  const long n = static_cast<long>(s.n());
  const double tail = 0.5 * (1.0 - conf);

  // pmf of Bin(n, p), built outward from the mode and normalised.
  std::vector<double> pmf(static_cast<std::size_t>(n + 1), 0.0);
  long mode = std::clamp<long>(static_cast<long>(std::floor((n + 1) * p)), 0, n);
  pmf[static_cast<std::size_t>(mode)] = 1.0;
  const double ratio = p / (1.0 - p);
  for (long j = mode; j < n; ++j)
    pmf[static_cast<std::size_t>(j + 1)] =
        pmf[static_cast<std::size_t>(j)] * ratio * static_cast<double>(n - j) / static_cast<double>(j + 1);
  for (long j = mode; j > 0; --j)
    pmf[static_cast<std::size_t>(j - 1)] =
        pmf[static_cast<std::size_t>(j)] / ratio * static_cast<double>(j) / static_cast<double>(n - j + 1);
  double total = 0.0;
  for (double v : pmf) total += v;

  // B(j) = P(Bin <= j). Coverage of [X_(l), X_(u)] is B(u-1) - B(l-1).
  long l = 0, u = 0;
  double cum = 0.0;
  for (long j = 0; j < n; ++j) {
    cum += pmf[static_cast<std::size_t>(j)] / total;
    if (cum <= tail) l = j + 1;
    if (u == 0 && cum >= 1.0 - tail) u = j + 1;
  }
  if (l < 1 || u < 1 || u > n || l > u)
    throw SampleTooSmallError("sample too small for the requested quantile confidence");
  return {s.order_stat(static_cast<std::size_t>(l)), s.order_stat(static_cast<std::size_t>(u))};
}

}  // namespace strictbounds
