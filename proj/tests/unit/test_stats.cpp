#include <catch_amalgamated.hpp>

#include <oracles.hpp>
#include <strictbounds/strictbounds.hpp>

using namespace strictbounds;
using Catch::Approx;

TEST_CASE("normal distribution examples", "[stats]") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_quantile(0.975) == Approx(1.959964).margin(1e-6));
  CHECK(normal_cdf(-1.0) == Approx(0.158655).margin(1e-6));
  CHECK(normal_quantile(0.975) == Approx(oracle::normal_quantile(0.975)).margin(1e-12));
  CHECK_THROWS(normal_quantile(0.0));
  CHECK_THROWS(normal_quantile(1.0));
  CHECK_THROWS(normal_quantile(-0.1));
}

TEST_CASE("normal quantile round trip and upper cutoffs", "[stats][property]") {
  for (double p : {1e-12, 1e-8, 1e-4, 0.001, 0.01, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.9, 0.97575, 0.99, 0.999, 1 - 1e-6}) {
    CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) <= 1e-12);
  }
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(1e-6, 1 - 1e-6);
  for (int i = 0; i < 2000; ++i) {
    double p = u(gen);
    CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) <= 1e-12);
  }
  // P(Z > z_a) = a.
  for (double a : {0.005, 0.025, 0.05, 0.16, 0.5}) CHECK(1.0 - normal_cdf(upper_normal_cutoff(a)) == Approx(a).epsilon(1e-10));
  CHECK(upper_normal_cutoff(0.025) == Approx(1.959964).margin(1e-6));
}

TEST_CASE("chi-square examples", "[stats]") {
  CHECK(chi2_quantile(0.95, 1) == Approx(3.841459).margin(1e-5));
  CHECK(chi2_quantile(0.68, 1) == Approx(0.988946).margin(1e-5));
  CHECK(chi2_quantile(0.95, 1) == Approx(oracle::chi2_quantile(0.95, 1)).margin(1e-7));
  CHECK(chi2_quantile(0.68, 1) == Approx(oracle::chi2_quantile(0.68, 1)).margin(1e-7));
  for (int k = 1; k <= 6; ++k) CHECK(chi2_cdf(0.0, k) == 0.0);
  CHECK_THROWS(chi2_quantile(0.5, 0));
  CHECK_THROWS(chi2_quantile(1.0, 2));
  CHECK_THROWS(chi2_cdf(1.0, 0));
}

TEST_CASE("chi-square agrees with the quadrature oracle", "[stats][oracle]") {
  for (int k : {1, 2, 3, 4, 5, 7, 10, 25}) {
    for (double c : {0.01, 0.3, 1.0, 2.5, 3.8414588, 6.0, 11.0, 20.0, 40.0}) {
      CHECK(chi2_cdf(c, k) == Approx(oracle::chi2_cdf(c, k)).margin(1e-10));
    }
  }
  for (int k : {1, 2, 3, 5, 12}) {
    for (double p : {0.05, 0.32, 0.5, 0.68, 0.95, 0.99}) {
      CHECK(chi2_quantile(p, k) == Approx(oracle::chi2_quantile(p, k)).epsilon(1e-8));
    }
  }
}

TEST_CASE("chi-square round trip and the z^2 identity", "[stats][property]") {
  for (int k : {1, 2, 3, 4, 8, 30}) {
    for (double p : {1e-6, 0.01, 0.1, 0.32, 0.5, 0.68, 0.9, 0.95, 0.999, 1 - 1e-9}) {
      CHECK(std::abs(chi2_cdf(chi2_quantile(p, k), k) - p) <= 1e-10);
    }
  }
  for (double a : {0.001, 0.01, 0.05, 0.1, 0.32, 0.5, 0.9}) {
    const double z = upper_normal_cutoff(a / 2);
    CHECK(std::abs(z * z - chi2_quantile(1 - a, 1)) <= 1e-9);
  }
}

TEST_CASE("empirical quantile examples", "[stats]") {
  EmpiricalSample s({10, 9, 8, 7, 6, 5, 4, 3, 2, 1});
  CHECK(empirical_quantile(s, 0.5) == 5);
  CHECK(empirical_quantile(s, 0.51) == 6);
  CHECK(empirical_quantile(s, 0.05) == 1);
  for (double p : {0.01, 0.5, 0.99}) CHECK(empirical_quantile(EmpiricalSample({7}), p) == 7);

  Engine eng = StreamFamily(3).stream(0);
  std::vector<double> v(100000);
  VectorXd z(1);
  for (auto& x : v) {
    fill_standard_normal(eng, z);
    x = z[0];
  }
  CHECK(std::abs(empirical_quantile(EmpiricalSample(v), 0.975) - 1.95996) <= 0.02);
  CHECK_THROWS(EmpiricalSample({}));
  CHECK_THROWS(empirical_quantile(s, 1.0));
}

TEST_CASE("empirical CDF", "[stats]") {
  EmpiricalSample s({3, 1, 2, 2});
  CHECK(s.cdf(0.5) == 0.0);
  CHECK(s.cdf(1.0) == 0.25);
  CHECK(s.cdf(2.0) == 0.75);
  CHECK(s.cdf(10.0) == 1.0);
  CHECK(s.order_stat(1) == 1);
  CHECK(s.order_stat(4) == 3);
}

TEST_CASE("Clopper-Pearson examples", "[stats]") {
  auto a = clopper_pearson(0, 10, 0.05);
  CHECK(a.first == 0.0);
  CHECK(a.second == Approx(1 - std::pow(0.025, 0.1)).margin(1e-9));
  CHECK(a.second == Approx(0.3085).margin(1e-4));
  auto b = clopper_pearson(10, 10, 0.05);
  CHECK(b.first == Approx(0.6915).margin(1e-4));
  CHECK(b.second == 1.0);
  auto c = clopper_pearson(5, 10, 0.05);
  CHECK(c.first == Approx(0.1871).margin(1e-3));
  CHECK(c.second == Approx(0.8129).margin(1e-3));
  CHECK_THROWS(clopper_pearson(11, 10, 0.05));
}

TEST_CASE("Clopper-Pearson agrees with beta quantiles", "[stats][oracle]") {
  for (long n : {1L, 5L, 20L, 60L}) {
    for (long k = 0; k <= n; k += std::max(1L, n / 6)) {
      for (double alpha : {0.05, 0.32}) {
        auto lib = clopper_pearson(k, n, alpha);
        auto ref = oracle::clopper_pearson(k, n, alpha);
        CHECK(lib.first == Approx(ref.first).margin(1e-7));
        CHECK(lib.second == Approx(ref.second).margin(1e-7));
      }
    }
  }
}

TEST_CASE("Clopper-Pearson brackets the estimate for large n", "[stats][property]") {
  for (long n : {1000L, 50000L, 100000L}) {
    for (double p : {0.01, 0.5, 0.68, 0.95, 0.975}) {
      long k = static_cast<long>(p * n);
      auto ci = clopper_pearson(k, n, 0.05);
      double ph = static_cast<double>(k) / n;
      CHECK(ci.first <= ph);
      CHECK(ci.second >= ph);
      // Normal approximation to the half-width.
      double hw = 1.96 * std::sqrt(ph * (1 - ph) / n);
      CHECK(0.5 * (ci.second - ci.first) == Approx(hw).epsilon(0.1));
    }
  }
}

TEST_CASE("order-statistic quantile CI", "[stats]") {
  SECTION("covers the uniform quantile at the nominal rate") {
    int hits = 0;
    StreamFamily fam(42);
    for (int rep = 0; rep < 200; ++rep) {
      Engine eng = fam.stream(rep);
      std::uniform_real_distribution<double> u(0, 1);
      std::vector<double> v(10000);
      for (auto& x : v) x = u(eng);
      auto ci = quantile_order_stat_ci(EmpiricalSample(v), 0.68, 0.95);
      if (ci.first <= 0.68 && 0.68 <= ci.second) ++hits;
    }
    CHECK(hits >= 190);
  }
  SECTION("too small") {
    std::vector<double> v{1, 2, 3, 4, 5};
    CHECK_THROWS_AS(quantile_order_stat_ci(EmpiricalSample(v), 0.68, 0.99), SampleTooSmallError);
  }
  SECTION("degenerate") {
    auto ci = quantile_order_stat_ci(EmpiricalSample(std::vector<double>(500, 2.5)), 0.9, 0.95);
    CHECK(ci.first == 2.5);
    CHECK(ci.second == 2.5);
  }
  SECTION("brackets the point estimate") {
    Engine eng = StreamFamily(9).stream(0);
    std::exponential_distribution<double> e(1.0);
    std::vector<double> v(5000);
    for (auto& x : v) x = e(eng);
    EmpiricalSample s(v);
    for (double p : {0.1, 0.5, 0.68, 0.95}) {
      auto ci = quantile_order_stat_ci(s, p, 0.95);
      CHECK(ci.first <= empirical_quantile(s, p));
      CHECK(ci.second >= empirical_quantile(s, p));
      CHECK(ci.first <= -std::log(1 - p) + 0.2);
    }
  }
}

TEST_CASE("mean and standard error", "[stats]") {
  auto ms = mean_and_se({1, 2, 3, 4});
  CHECK(ms.first == 2.5);
  CHECK(ms.second == Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK_THROWS_AS(mean_and_se({1}), SampleTooSmallError);
}
