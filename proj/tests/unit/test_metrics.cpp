#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lightrdl/metrics.hpp"
#include "oracles.hpp"

using namespace lightrdl;

TEST_SUITE("metrics") {
  TEST_CASE("auc hand cases") {
    CHECK(rocauc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<double>{0, 0, 1, 1}) == 0.75);
    CHECK(rocauc(std::vector<double>{1, 2, 3}, std::vector<double>{0, 1, 1}) == 1.0);
    CHECK(rocauc(std::vector<double>{3, 2, 1}, std::vector<double>{0, 1, 1}) == 0.0);
    CHECK(rocauc(std::vector<double>{5, 5, 5, 5}, std::vector<double>{0, 1, 0, 1}) == 0.5);
  }

  TEST_CASE("auc errors") {
    CHECK_THROWS_AS(rocauc(std::vector<double>{1, 2}, std::vector<double>{1, 1}), MetricError);
    CHECK_THROWS_AS(rocauc(std::vector<double>{1, 2}, std::vector<double>{0, 2}), MetricError);
    CHECK_THROWS_AS(rocauc(std::vector<double>{1}, std::vector<double>{0, 1}), MetricError);
    CHECK_THROWS_AS(rocauc(std::vector<double>{std::nan(""), 1}, std::vector<double>{0, 1}), MetricError);
    CHECK_THROWS_AS(rocauc(std::vector<double>{}, std::vector<double>{}), MetricError);
  }

  TEST_CASE("auc matches pairwise counting on random instances with ties") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 300; ++trial) {
      const int n = std::uniform_int_distribution<int>(2, 60)(rng);
      std::vector<double> s(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
      const int levels = std::uniform_int_distribution<int>(1, 8)(rng);
      for (int i = 0; i < n; ++i) {
        s[static_cast<std::size_t>(i)] = std::uniform_int_distribution<int>(0, levels)(rng) * 0.25;
        y[static_cast<std::size_t>(i)] = std::bernoulli_distribution(0.4)(rng) ? 1.0 : 0.0;
      }
      y[0] = 1.0;
      y[1] = 0.0;
      CHECK(rocauc(s, y) == oracles::pairwise_auc(s, y));
    }
  }

  TEST_CASE("auc is invariant to strictly increasing transforms") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal;
    std::vector<double> s(80), y(80), e(80);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = normal(rng);
      y[i] = i % 3 == 0 ? 1.0 : 0.0;
      e[i] = std::exp(2.0 * s[i]) + 1.0;
    }
    CHECK(rocauc(s, y) == rocauc(e, y));
    // Distinct scores, so negating them mirrors every pair.
    std::vector<double> neg(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) neg[i] = -s[i];
    CHECK(rocauc(neg, y) == doctest::Approx(1.0 - rocauc(s, y)).epsilon(1e-15));
  }

  TEST_CASE("mae") {
    CHECK(mae(std::vector<double>{1, 2, 3}, std::vector<double>{1, 4, 0}) == doctest::Approx(5.0 / 3.0));
    CHECK(mae(std::vector<double>{-1}, std::vector<double>{1}) == 2.0);
    CHECK(mae(std::vector<double>{1, 3}, std::vector<double>{2, 2}) == 1.0);
    CHECK(mae(std::vector<double>{1.5, 3.5}, std::vector<double>{2.5, 2.5}) == 1.0);
    CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), MetricError);
    CHECK_THROWS_AS(mae(std::vector<double>{1}, std::vector<double>{1, 2}), MetricError);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> p(20), l(20);
      double sum = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = u(rng);
        l[i] = u(rng);
        sum += std::abs(p[i] - l[i]);
      }
      CHECK(std::abs(mae(p, l) - sum / 20.0) <= 1e-15 * std::max(1.0, sum / 20.0));
    }
  }
}
