// The three-dimensional counterexample: K = I, x >= 0, h = (1, 1, -1).
// The null law of the LLR at x* = (0, 0, 1) is not dominated by chi2_1, so
// OSB intervals undercover there.

#include <cstdio>

#include <strictbounds/strictbounds.hpp>

namespace sb = strictbounds;

int main() {
  const sb::LlrStatistic stat(sb::presets::three_dim());
  const sb::StreamFamily rng(2024);

  auto sample = sb::sample_null(stat, sb::presets::pt({0, 0, 1}), 200000, rng);
  auto [mean, se] = sb::mean_estimate(sample);
  std::printf("E[lambda] at (0,0,1): %.4f +- %.4f (chi2_1 has mean 1)\n", mean, se);

  auto dom = sb::dominance_diagnostic(sample);
  std::printf("dominance verdict: %s, most negative z %.2f\n", sb::to_string(dom.verdict), dom.min_z);

  const double level = 0.68;
  auto curve = sb::run_quantile_curve(level, {0.05, 0.5, 1.0, 2.0}, 50000, rng);
  std::printf("\n%.0f%% quantile along (t, t, 1); chi2_1 cutoff %.4f\n", 100 * level, curve.chi2_cutoff);
  for (const auto& r : curve.rows)
    std::printf("  t = %.2f  q = %.4f  CI [%.4f, %.4f]%s\n", r.t, r.q, r.ci_lo, r.ci_hi, r.exceeds ? "  exceeds" : "");

  auto sc = sb::presets::threeD(1 - level);
  sc.truths = {sb::presets::pt({0, 0, 1})};
  sc.methods = {sb::Method::SSB, sb::Method::OSB};
  sc.reps = 20000;
  auto cov = sb::run_coverage(sc, rng);
  std::printf("\ncoverage at (0,0,1), nominal %.2f\n", level);
  for (const auto& r : cov.rows)
    std::printf("  %-4s %.4f [%.4f, %.4f], mean length %.3f\n", sb::to_string(r.method), r.coverage, r.cov_lo,
                r.cov_hi, r.mean_len);
}
