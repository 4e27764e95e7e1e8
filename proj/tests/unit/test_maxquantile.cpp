#include <catch_amalgamated.hpp>

#include <oracles.hpp>
#include <strictbounds/strictbounds.hpp>

using namespace strictbounds;
using Catch::Approx;

namespace {

VectorXd vec(std::initializer_list<double> v) { return presets::pt(v).x; }

const double kChi95 = 3.841458820694124;

}  // namespace

TEST_CASE("decision rule basics", "[maxquantile]") {
  auto s = DecisionRule::scalar(2.5, 0.95, "test", 9);
  CHECK(s.kind() == DecisionRule::Kind::Scalar);
  CHECK(s.q(-100) == 2.5);
  CHECK(s.threshold(0.0, 7.0) == 2.5);
  CHECK(s.alpha() == Approx(0.05));
  CHECK(s.seed() == 9);
  CHECK_THROWS(DecisionRule::scalar(-1.0, 0.95, "bad"));
  CHECK_THROWS(DecisionRule::scalar(1.0, 1.0, "bad"));

  auto c1 = DecisionRule::chi2_one(0.95);
  CHECK(c1.q(3.0) == Approx(kChi95).margin(1e-9));
  auto cm = DecisionRule::chi2_m(0.95, 2);
  CHECK(cm.absolute());
  CHECK(cm.threshold(0.0, 1.0) == Approx(chi2_quantile(0.95, 2) - 1.0));
}

TEST_CASE("per-mu rules interpolate with the larger neighbour", "[maxquantile]") {
  auto r = DecisionRule::per_mu({-1, 0, 1}, {1.0, 3.0, 2.0}, 0.9, "grid");
  CHECK(r.q(-1) == 1.0);
  CHECK(r.q(0) == 3.0);
  CHECK(r.q(-0.5) == 3.0);
  CHECK(r.q(0.5) == 3.0);
  CHECK(r.q(1) == 2.0);
  CHECK(r.q(5) == 3.0);
  CHECK(r.q(-5) == 3.0);
  CHECK(r.scalar_value() == 3.0);
  CHECK_THROWS(DecisionRule::per_mu({0, 0}, {1, 1}, 0.9, "dup"));
  CHECK_THROWS(DecisionRule::per_mu({0, 1}, {1}, 0.9, "len"));
  auto f = DecisionRule::per_mu_function([](double mu) { return mu * mu; }, 0.9, "fn");
  CHECK(f.q(3.0) == 9.0);
  CHECK(f.is_function());
}

TEST_CASE("max_quantile over [0,1]^2 recovers the chi-square quantile in the 2D example", "[maxquantile][box01]") {
  LlrStatistic stat(presets::two_dim());
  auto res = max_quantile(stat, 0.95, presets::cube(2, 0.0, 1.0), {200, 10000, 0}, StreamFamily(2024));
  INFO("q = " << res.q << " [" << res.ci_lo << ", " << res.ci_hi << "] at " << res.argmax.transpose());
  CHECK(res.ci_lo <= kChi95);
  CHECK(res.ci_hi >= kChi95);
  CHECK(res.evaluations.size() <= 200);
  auto rule = res.to_rule();
  CHECK(rule.q(0.3) == res.ci_hi);
  CHECK(rule.level() == 0.95);
}

TEST_CASE("max_quantile over a wide box recovers the chi-square quantile in the 2D example", "[maxquantile]") {
  LlrStatistic stat(presets::two_dim());
  auto res = max_quantile(stat, 0.95, presets::cube(2, 0.0, 6.0), {200, 10000, 0}, StreamFamily(2024));
  INFO("q = " << res.q << " [" << res.ci_lo << ", " << res.ci_hi << "] at " << res.argmax.transpose());
  CHECK(res.ci_lo <= kChi95);
  CHECK(res.ci_hi >= kChi95);
}

TEST_CASE("max_quantile in the box problem stays below the chi-square quantile", "[maxquantile]") {
  LlrStatistic stat(presets::box_2d());
  auto res = max_quantile(stat, 0.95, presets::cube(2, 0.0, 1.0), {200, 10000, 0}, StreamFamily(2025));
  INFO("q = " << res.q << " [" << res.ci_lo << ", " << res.ci_hi << "] at " << res.argmax.transpose());
  CHECK(res.ci_hi < kChi95);
}

TEST_CASE("a single-point box reduces to one quantile evaluation", "[maxquantile]") {
  LlrStatistic stat(presets::three_dim());
  VectorXd x0 = vec({0.2, 0.5, 1.0});
  StreamFamily rng(77);
  auto res = max_quantile(stat, 0.9, Box{x0, x0}, {50, 5000, 0}, rng);
  auto direct = evaluate_quantile(stat, x0, 0.9, 5000, rng.child(0));
  CHECK(res.q == direct.q);
  CHECK(res.ci_hi == direct.ci_hi);
  CHECK(res.evaluations.size() == 1);
  EmpiricalSample s(sample_null_values(stat, ParameterPoint{x0}, 5000, rng.child(0)));
  CHECK(res.q == empirical_quantile(s, 0.9));
}

TEST_CASE("search boxes outside X are rejected", "[maxquantile]") {
  LlrStatistic stat(presets::two_dim());
  CHECK_THROWS(max_quantile(stat, 0.95, Box{vec({-1, 0}), vec({1, 1})}, {}, StreamFamily(1)));
  CHECK_THROWS(max_quantile(stat, 0.95, Box{vec({0, 0, 0}), vec({1, 1, 1})}, {}, StreamFamily(1)));
}

TEST_CASE("per-mu search matches the 1D analytic quantile", "[maxquantile][oracle]") {
  LlrStatistic stat(presets::one_dim());
  std::vector<double> grid{0.0, 0.5, 1.0, 2.0};
  auto res = max_quantile_per_mu(stat, 0.95, grid, presets::cube(1, 0.0, 3.0), {20, 20000, 0}, StreamFamily(5));
  REQUIRE(res.per_mu.size() == 4);
  CHECK(res.dropped.empty());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double exact = quantile_1d_constrained(grid[i], 0.95);
    INFO("mu = " << grid[i] << " q " << res.per_mu[i].q << " exact " << exact);
    CHECK(res.per_mu[i].ci_lo <= exact);
    CHECK(res.per_mu[i].ci_hi >= exact);
  }
}

TEST_CASE("per-mu search finds slices beyond the chi-square cutoff in 3D", "[maxquantile]") {
  LlrStatistic stat(presets::three_dim());
  std::vector<double> grid{-1.0, -0.75, -0.5, 0.0, 1.0};
  auto res = max_quantile_per_mu(stat, 0.68, grid, presets::cube(3, 0.0, 3.0), {40, 10000, 0}, StreamFamily(6));
  const double cut = chi2_quantile(0.68, 1);
  bool exceeds = false;
  for (const auto& r : res.per_mu) exceeds = exceeds || r.ci_lo > cut;
  CHECK(exceeds);
}

TEST_CASE("per-mu with one grid value equals the slice search", "[maxquantile]") {
  LlrStatistic stat(presets::two_dim());
  auto res = max_quantile_per_mu(stat, 0.9, {0.25}, presets::cube(2, 0.0, 1.0), {30, 5000, 0}, StreamFamily(8));
  REQUIRE(res.per_mu.size() == 1);
  auto rule = res.to_rule(0.9, 8);
  CHECK(rule.mu_grid() == std::vector<double>{0.25});
  CHECK(rule.q(0.25) == res.per_mu[0].ci_hi);
  CHECK(rule.q(-3.0) == res.per_mu[0].ci_hi);
  for (const auto& e : res.per_mu[0].evaluations) CHECK(e.x[0] - e.x[1] == Approx(0.25).margin(1e-12));
}

TEST_CASE("per-mu drops grid values with empty slices", "[maxquantile]") {
  LlrStatistic stat(presets::box_2d());
  auto res = max_quantile_per_mu(stat, 0.9, {-2.0, 0.0, 0.5, 1.5}, presets::cube(2, 0.0, 1.0), {10, 2000, 0},
                                 StreamFamily(8));
  CHECK(res.mu_grid == std::vector<double>{0.0, 0.5});
  CHECK(res.dropped == std::vector<double>{-2.0, 1.5});
}

TEST_CASE("max quantile is nondecreasing in the level", "[maxquantile][property]") {
  LlrStatistic stat(presets::three_dim());
  double prev = -1.0;
  for (double lvl : {0.5, 0.68, 0.95}) {
    auto res = max_quantile(stat, lvl, presets::cube(3, 0.0, 2.0), {40, 5000, 0}, StreamFamily(31));
    CHECK(res.q >= prev);
    prev = res.q;
  }
}

TEST_CASE("rules from the CI upper end are valid on a validation grid", "[maxquantile][property]") {
  LlrStatistic stat(presets::box_2d());
  const double alpha = 0.05;
  auto res = max_quantile(stat, 1 - alpha, presets::cube(2, 0.0, 1.0), {60, 10000, 0}, StreamFamily(41));
  auto rule = res.to_rule();
  const std::size_t n = 20000;
  int k = 0;
  for (double a : {0.0, 0.25, 0.5, 0.75, 1.0})
    for (double b : {0.0, 0.5, 1.0}) {
      auto v = sample_null_values(stat, presets::pt({a, b}), n, StreamFamily(500 + k++));
      double err = std::count_if(v.begin(), v.end(), [&](double l) { return l > rule.q(a - b); }) / double(n);
      double sigma = std::sqrt(alpha * (1 - alpha) / n);
      INFO("x = (" << a << ", " << b << ") type-I " << err);
      CHECK(err <= alpha + 3 * sigma);
    }
}

TEST_CASE("scalar max quantile dominates per-mu values", "[maxquantile][property]") {
  LlrStatistic stat(presets::three_dim());
  const Box box = presets::cube(3, 0.0, 2.0);
  auto scalar = max_quantile(stat, 0.68, box, {80, 5000, 0}, StreamFamily(51));
  auto per = max_quantile_per_mu(stat, 0.68, {-1.5, -1.0, 0.0, 1.0, 2.0}, box, {30, 5000, 0}, StreamFamily(51));
  for (const auto& r : per.per_mu) {
    INFO("per-mu " << r.q << " scalar " << scalar.q);
    CHECK(scalar.ci_hi >= r.ci_lo);
  }
}

TEST_CASE("chance-constraint certificates", "[maxquantile]") {
  SECTION("unconstrained model at the chi-square quantile is on the boundary") {
    LlrStatistic stat(ProblemInstance(MatrixXd::Identity(2, 2), vec({1, 1}), ConstraintSet::unconstrained(2)));
    auto c = cco_certify(stat, presets::pt({0.3, -0.2}), kChi95, 0.95, 100000, StreamFamily(3));
    CHECK(c.cp_lo <= 0.95);
    CHECK(c.cp_hi >= 0.95);
    CHECK(c.p_hat == Approx(0.95).margin(4 * c.sigma));
  }
  SECTION("1D at zero with q = 2 is feasible") {
    LlrStatistic stat(presets::one_dim());
    auto c = cco_certify(stat, presets::pt({0}), 2.0, 0.95, 100000, StreamFamily(3));
    const double exact = 0.5 * (1 + oracle::chi2_1_cdf(2.0));
    CHECK(exact == Approx(0.9214).margin(1e-4));
    CHECK(c.p_hat == Approx(exact).margin(4 * c.sigma));
    CHECK(c.feasible);
  }
  SECTION("infinite q is infeasible") {
    LlrStatistic stat(presets::one_dim());
    auto c = cco_certify(stat, presets::pt({1}), kInf, 0.95, 1000, StreamFamily(3));
    CHECK(c.p_hat == 1.0);
    CHECK_FALSE(c.feasible);
  }
}

TEST_CASE("max_quantile is reproducible and thread-count independent", "[maxquantile][property]") {
  LlrStatistic stat(presets::two_dim());
  auto a = max_quantile(stat, 0.9, presets::cube(2, 0.0, 1.0), {30, 5000, 1}, StreamFamily(12));
  auto b = max_quantile(stat, 0.9, presets::cube(2, 0.0, 1.0), {30, 5000, 3}, StreamFamily(12));
  CHECK(a.q == b.q);
  CHECK(a.ci_hi == b.ci_hi);
  CHECK(a.argmax == b.argmax);
  CHECK(a.evaluations.size() == b.evaluations.size());
}
