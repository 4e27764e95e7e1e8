// Intervals for x >= 0 from one observation y ~ N(x, 1), at 95%.

#include <cstdio>

#include <strictbounds/strictbounds.hpp>

namespace sb = strictbounds;

int main() {
  const auto inst = sb::presets::one_dim();
  const sb::LlrStatistic stat(inst);
  sb::QpSolver ws;
  const double alpha = 0.05;

  // Exact per-mu decision values from the closed-form null CDF.
  auto mqmu = sb::DecisionRule::per_mu_function(
      [&](double mu) { return sb::quantile_1d_constrained(std::max(mu, 0.0), 1 - alpha); }, 1 - alpha, "analytic");

  std::printf("%6s  %-18s  %-18s  %-18s\n", "y", "SSB", "OSB", "MQmu");
  for (double y : {-2.0, -1.0, 0.0, 0.5, 2.0, 4.0}) {
    sb::VectorXd obs(1);
    obs << y;
    auto show = [](const sb::IntervalResult& r) {
      static char buf[32];
      if (r.empty) return "empty";
      std::snprintf(buf, sizeof buf, "[%.4f, %.4f]", r.lower, r.upper);
      return static_cast<const char*>(buf);
    };
    std::printf("%6.2f  %-18s", y, show(sb::interval_ssb(stat, obs, alpha, ws)));
    std::printf("  %-18s", show(sb::interval_osb(stat, obs, alpha, ws)));
    std::printf("  %-18s\n", show(sb::interval_mqmu(stat, obs, alpha, mqmu, ws)));
  }
}
