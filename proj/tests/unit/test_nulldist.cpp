#include <catch_amalgamated.hpp>

#include <oracles.hpp>
#include <strictbounds/strictbounds.hpp>

using namespace strictbounds;
using Catch::Approx;

namespace {

/// Independent form of the 1D null CDF from the normal CDF.
double cdf_1d_oracle(double mu, double c) {
  if (mu == 0.0) return 0.5 * (1.0 + oracle::chi2_1_cdf(c));
  if (c < mu * mu) return oracle::chi2_1_cdf(c);
  // lambda <= c  <=>  y in [mu - sqrt c, mu + sqrt c] (y >= 0 part) or y < 0 with -2 y mu + mu^2 <= c.
  double hi = mu + std::sqrt(c);
  double lo = -(c - mu * mu) / (2.0 * mu);
  // y ~ N(mu, 1): P(lo <= y <= hi)
  return oracle::normal_cdf(hi - mu) - oracle::normal_cdf(lo - mu);
}

}  // namespace

TEST_CASE("1D null has a point mass at zero", "[nulldist]") {
  LlrStatistic stat(presets::one_dim());
  auto s = sample_null(stat, presets::pt({0}), 100000, StreamFamily(1));
  CHECK(s.n() == 100000);
  CHECK(s.mu == 0.0);
  CHECK(s.seed == 1);
  double zeros = s.draws.cdf(0.0);
  CHECK(zeros == Approx(0.5).margin(0.01));
}

TEST_CASE("1D analytic CDF examples", "[nulldist]") {
  CHECK(cdf_1d_constrained(0.0, chi2_quantile(0.95, 1)) == Approx(0.975).margin(1e-12));
  CHECK(cdf_1d_constrained(2.0, 1.0) == Approx(0.6827).margin(1e-4));
  CHECK(cdf_1d_constrained(2.0, 1.0) == Approx(oracle::chi2_1_cdf(1.0)).margin(1e-12));
  for (double mu : {0.3, 1.0, 4.0}) {
    CHECK(cdf_1d_constrained(mu, 1e6) == Approx(1.0).margin(1e-12));
    CHECK(cdf_1d_constrained(mu, kInf) == 1.0);
  }
  CHECK_THROWS(cdf_1d_constrained(-1.0, 1.0));
}

TEST_CASE("1D analytic CDF matches an independent derivation", "[nulldist][oracle]") {
  for (double mu : {0.0, 0.1, 0.5, 1.0, 2.0, 3.5})
    for (double c : {0.0, 0.05, 0.5, 1.0, 2.0, 3.84, 6.0, 12.0, 20.0})
      CHECK(cdf_1d_constrained(mu, c) == Approx(cdf_1d_oracle(mu, c)).margin(1e-12));
}

TEST_CASE("1D analytic quantile examples", "[nulldist]") {
  CHECK(quantile_1d_constrained(10.0, 0.95) == Approx(3.8415).margin(1e-4));
  CHECK(quantile_1d_constrained(10.0, 0.95) == Approx(chi2_quantile(0.95, 1)).margin(1e-9));
  const double z = upper_normal_cutoff(0.05);
  CHECK(quantile_1d_constrained(0.0, 0.95) == Approx(z * z).margin(1e-9));
  CHECK(quantile_1d_constrained(0.0, 0.95) == Approx(2.7055).margin(1e-4));
  for (double mu : {0.05, 0.5, 1.0, 2.0})
    for (double lvl : {0.5, 0.68, 0.95, 0.99}) {
      double q = quantile_1d_constrained(mu, lvl);
      CHECK(cdf_1d_constrained(mu, q) == Approx(lvl).margin(1e-9));
    }
}

TEST_CASE("1D empirical CDF matches the analytic CDF", "[nulldist][property]") {
  LlrStatistic stat(presets::one_dim());
  for (double x : {0.0, 0.25, 1.0, 2.0}) {
    const std::size_t n = 100000;
    auto s = sample_null(stat, presets::pt({x}), n, StreamFamily(100 + static_cast<int>(4 * x)));
    // Sup distance over sample points, including the atom at zero.
    double d = 0.0;
    const auto& v = s.draws.values();
    for (std::size_t i = 0; i < n; i += 7) {
      double F = cdf_1d_constrained(x, v[i]);
      d = std::max(d, std::abs(s.draws.cdf(v[i]) - F));
    }
    INFO("x = " << x << " distance " << d);
    CHECK(d <= 2.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("1D analytic dominance by chi-square", "[nulldist][property]") {
  for (int k = 0; k <= 50; ++k) {
    const double mu = 0.1 * k;
    for (int j = 0; j <= 2000; ++j) {
      const double c = 0.01 * j;
      CHECK(cdf_1d_constrained(mu, c) >= chi2_cdf(c, 1) - 1e-14);
    }
  }
}

TEST_CASE("dominance verdicts", "[nulldist]") {
  SECTION("2D counterexample is dominated") {
    LlrStatistic stat(presets::two_dim());
    for (double a : {0.0, 0.33}) {
      auto s = sample_null(stat, presets::pt({a, a}), 1000000, StreamFamily(7));
      auto rep = dominance_diagnostic(s);
      INFO("a = " << a << " min z " << rep.min_z);
      CHECK(rep.verdict == DominanceVerdict::Dominated);
      CHECK(rep.rows.size() == 512);
    }
  }
  SECTION("3D counterexample is not dominated") {
    LlrStatistic stat(presets::three_dim());
    auto s = sample_null(stat, presets::pt({0, 0, 1}), 1000000, StreamFamily(7));
    auto rep = dominance_diagnostic(s);
    CHECK(rep.verdict == DominanceVerdict::NotDominated);
    CHECK_FALSE(rep.violations.empty());
    CHECK(rep.min_z < -3.0);
  }
  SECTION("a chi-square sample is dominated by itself") {
    Engine eng = StreamFamily(12).stream(0);
    std::vector<double> v(200000);
    VectorXd z(1);
    for (auto& x : v) {
      fill_standard_normal(eng, z);
      x = z[0] * z[0];
    }
    auto rep = dominance_diagnostic(EmpiricalSample(v));
    CHECK(rep.verdict == DominanceVerdict::Dominated);
    double worst = 0.0;
    for (const auto& r : rep.rows) worst = std::max(worst, std::abs(r.delta_cdf));
    CHECK(worst < 0.01);
  }
  SECTION("grid and CSV") {
    LlrStatistic stat(presets::one_dim());
    auto s = sample_null(stat, presets::pt({0.5}), 20000, StreamFamily(3));
    auto rep = dominance_diagnostic(s);
    CHECK(rep.rows.front().c == Approx(1e-4));
    CHECK(rep.rows.back().c == Approx(1.05 * s.draws.values().back()));
    for (std::size_t i = 1; i < rep.rows.size(); ++i) CHECK(rep.rows[i].c > rep.rows[i - 1].c);
    auto csv = rep.to_csv();
    CHECK(csv.rfind("c,delta_cdf,sigma\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 513);
  }
  SECTION("small samples are rejected") {
    LlrStatistic stat(presets::one_dim());
    auto s = sample_null(stat, presets::pt({0.5}), 500, StreamFamily(3));
    CHECK_THROWS_AS(dominance_diagnostic(s), SampleTooSmallError);
  }
}

TEST_CASE("a dominated law has tail mass at most alpha beyond the chi-square cutoff", "[nulldist][property]") {
  LlrStatistic stat(presets::two_dim());
  auto s = sample_null(stat, presets::pt({0.33, 0.33}), 200000, StreamFamily(21));
  REQUIRE(dominance_diagnostic(s).verdict == DominanceVerdict::Dominated);
  auto fresh = sample_null(stat, presets::pt({0.33, 0.33}), 200000, StreamFamily(22));
  for (double alpha : {0.05, 0.32}) {
    const double q = chi2_quantile(1 - alpha, 1);
    const double tail = 1.0 - fresh.draws.cdf(q);
    const double sigma = std::sqrt(alpha * (1 - alpha) / 200000.0);
    CHECK(tail <= alpha + 3 * sigma);
  }
}

TEST_CASE("null means", "[nulldist]") {
  SECTION("3D counterexample") {
    LlrStatistic stat(presets::three_dim());
    auto s = sample_null(stat, presets::pt({0, 0, 1}), 1000000, StreamFamily(13));
    auto [m, se] = mean_estimate(s);
    const double target = 13.0 / 6.0 - (1.0 + 2.0 * oracle::normal_cdf(-1.0) - std::exp(-0.5) / std::sqrt(2 * std::numbers::pi));
    CHECK(target == Approx(1.0914).margin(1e-4));
    CHECK(std::abs(m - target) <= 4 * se);
  }
  SECTION("unconstrained") {
    MatrixXd K(2, 2);
    K << 2, 1, 0, 1;
    VectorXd h(2);
    h << 1, 1;
    LlrStatistic stat(ProblemInstance(K, h, ConstraintSet::unconstrained(2)));
    auto s = sample_null(stat, presets::pt({-0.5, 1.0}), 100000, StreamFamily(14));
    auto [m, se] = mean_estimate(s);
    CHECK(std::abs(m - 1.0) <= 4 * se);
  }
  SECTION("1D at zero") {
    LlrStatistic stat(presets::one_dim());
    auto s = sample_null(stat, presets::pt({0}), 100000, StreamFamily(15));
    auto [m, se] = mean_estimate(s);
    CHECK(std::abs(m - 0.5) <= 4 * se);
  }
}

TEST_CASE("null sampling is deterministic and uses common random numbers", "[nulldist][property]") {
  LlrStatistic stat(presets::three_dim());
  auto a = sample_null_values(stat, presets::pt({0, 0, 1}), 10000, StreamFamily(9), 1);
  auto b = sample_null_values(stat, presets::pt({0, 0, 1}), 10000, StreamFamily(9), 3);
  CHECK(a == b);
  auto c = sample_null_values(stat, presets::pt({0, 0, 1}), 10000, StreamFamily(10), 1);
  CHECK(a != c);
  // Same noise at different x: lambda at x and at x + d share y - K x.
  LlrStatistic unc(ProblemInstance(MatrixXd::Identity(2, 2), presets::pt({1, 0}).x, ConstraintSet::unconstrained(2)));
  auto u1 = sample_null_values(unc, presets::pt({0, 0}), 5000, StreamFamily(4));
  auto u2 = sample_null_values(unc, presets::pt({3, -2}), 5000, StreamFamily(4));
  for (std::size_t i = 0; i < u1.size(); ++i) CHECK(u1[i] == Approx(u2[i]).margin(1e-9));
}

TEST_CASE("truth points must lie in X", "[nulldist]") {
  LlrStatistic stat(presets::two_dim());
  CHECK_THROWS(sample_null(stat, presets::pt({-1, 0}), 100, StreamFamily(1)));
  CHECK_THROWS_AS(sample_null(stat, presets::pt({1, 0, 0}), 100, StreamFamily(1)), DimensionError);
}
