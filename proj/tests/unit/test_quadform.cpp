#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <irtvuong/quadform.hpp>

#include "oracles.hpp"

using namespace irtvuong;

TEST_CASE("chi-square quantiles") {
  CHECK(std::abs(upper_tail(std::vector<double>{1.0}, 3.841459) - 0.05) < 1e-6);
  CHECK(std::abs(upper_tail(std::vector<double>{1.0, 1.0, 1.0}, 7.814728) - 0.05) < 1e-6);
}

TEST_CASE("unit weights reproduce chi-square survival on a grid") {
  for (int k = 1; k <= 5; ++k) {
    std::vector<double> w(static_cast<std::size_t>(k), 1.0);
    double worst = 0.0;
    for (int i = 0; i < 30; ++i) {
      const double x = 0.05 + 0.6 * i;
      worst = std::max(worst, std::abs(upper_tail(w, x) - oracle::chi2_survival(k, x)));
    }
    CAPTURE(k);
    CHECK(worst < 1e-7);
  }
}

TEST_CASE("scaling identity") {
  for (double x : {0.1, 0.8, 2.0, 5.0, 11.0}) {
    CHECK(std::abs(upper_tail(std::vector<double>{2.0}, x) - upper_tail(std::vector<double>{1.0}, x / 2.0)) < 1e-10);
    CHECK(std::abs(upper_tail(std::vector<double>{0.5, 1.5, 3.0}, 2 * x) -
                   upper_tail(std::vector<double>{0.25, 0.75, 1.5}, x)) < 1e-10);
  }
}

TEST_CASE("symmetric difference has median zero") {
  CHECK(std::abs(upper_tail(std::vector<double>{1.0, -1.0}, 0.0) - 0.5) < 1e-9);
  CHECK(std::abs(upper_tail(std::vector<double>{2.0, -1.0, 1.0, -2.0}, 0.0) - 0.5) < 1e-9);
}

TEST_CASE("reflection: P(Q > x) = 1 - P(-Q > -x)") {
  std::vector<double> w{2.0, 0.7, -0.4}, neg{-2.0, -0.7, 0.4};
  for (double x : {-1.5, -0.2, 0.3, 1.0, 4.0})
    CHECK(std::abs(upper_tail(w, x) + upper_tail(neg, -x) - 1.0) < 1e-9);
}

TEST_CASE("degenerate and zero weights") {
  CHECK(upper_tail(std::vector<double>{}, 1.0) == 0.0);
  CHECK(upper_tail(std::vector<double>{}, -1.0) == 1.0);
  CHECK(std::abs(upper_tail(std::vector<double>{1.0, 0.0, 0.0}, 2.0) - oracle::chi2_survival(1, 2.0)) < 1e-9);
}

TEST_CASE("mixed weights agree with Monte Carlo") {
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> z(0.0, 1.0);
  const std::vector<std::vector<double>> cases{{3.0, 1.0, -0.5, 0.2}, {0.9, 0.05, 0.05}, {-1.0, -0.3, 0.6}};
  const int n = 200000;
  for (const auto& w : cases) {
    std::vector<double> draws(n);
    for (auto& d : draws) {
      d = 0.0;
      for (double l : w) {
        const double zz = z(rng);
        d += l * zz * zz;
      }
    }
    for (double x : {-1.0, 0.0, 0.5, 2.0, 6.0}) {
      double hits = 0;
      for (double d : draws) hits += d > x;
      const double p = hits / n;
      const double se = std::sqrt(std::max(p * (1 - p), 1e-6) / n);
      CAPTURE(x);
      CHECK(std::abs(upper_tail(w, x) - p) < 4.0 * se);
    }
  }
}

TEST_CASE("survival is monotone and within [0, 1]") {
  std::vector<double> w{1.7, 0.9, 0.3, -0.2, 0.05};
  double prev = 1.0;
  for (double x = -3.0; x <= 40.0; x += 0.25) {
    const double p = upper_tail(w, x);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(p <= prev + 1e-10);
    prev = p;
  }
}

TEST_CASE("far tails are zero rather than noise") {
  CHECK(upper_tail(std::vector<double>{1.0, 0.5}, 500.0) == 0.0);
  CHECK(upper_tail(std::vector<double>{1.0, 0.5}, -1.0) == 1.0);
  CHECK(std::abs(upper_tail(std::vector<double>{1.0}, 60.0) - oracle::chi2_survival(1, 60.0)) < 1e-12);
}

TEST_CASE("p-value formatting") {
  CHECK(format_p_value(1e-15) == "< 1e-12");
  CHECK(format_p_value(0.5).find("0.5") != std::string::npos);
}
