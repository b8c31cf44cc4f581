#include <doctest.h>

#include <cmath>

#include <irtvuong/quadrature.hpp>

#include "oracles.hpp"

using namespace irtvuong;

TEST_CASE("two-point rule is +-1 with equal weights") {
  auto r = gauss_hermite_rule(2);
  CHECK(std::abs(r.nodes[0] + 1.0) < 1e-14);
  CHECK(std::abs(r.nodes[1] - 1.0) < 1e-14);
  CHECK(std::abs(r.weights[0] - 0.5) < 1e-14);
  CHECK(std::abs(r.weights[1] - 0.5) < 1e-14);
}

TEST_CASE("rules integrate normal moments exactly up to degree 2q-1") {
  // E Z^(2k) = (2k-1)!!
  for (int q : {3, 5, 10, 21, 41, 61}) {
    auto r = gauss_hermite_rule(q);
    CHECK(std::abs(r.weights.sum() - 1.0) < 1e-13);
    double dfact = 1.0;
    for (int k = 1; 2 * k <= 2 * q - 1 && k <= 6; ++k) {
      dfact *= 2 * k - 1;
      double m = 0.0, odd = 0.0;
      for (int i = 0; i < q; ++i) {
        m += r.weights[i] * std::pow(r.nodes[i], 2 * k);
        odd += r.weights[i] * std::pow(r.nodes[i], 2 * k - 1);
      }
      CHECK(std::abs(m - dfact) < 1e-9 * dfact);
      CHECK(std::abs(odd) < 1e-10);
    }
  }
}

TEST_CASE("q = 21 second moment") {
  QuadratureGrid g = build_grid(21, 1, Eigen::MatrixXd::Identity(1, 1));
  double m2 = 0.0;
  for (int i = 0; i < g.size(); ++i) m2 += g.weights[i] * g.nodes(i, 0) * g.nodes(i, 0);
  CHECK(std::abs(m2 - 1.0) < 1e-8);
}

TEST_CASE("expectations of simple functions") {
  QuadratureGrid g21 = build_grid(21, 1, Eigen::MatrixXd::Identity(1, 1));
  CHECK(std::abs(grid_expectation(g21, [](const Eigen::VectorXd&) { return 1.0; }) - 1.0) < 1e-13);
  CHECK(std::abs(grid_expectation(g21, [](const Eigen::VectorXd& t) { return t[0]; })) < 1e-12);
  QuadratureGrid g61 = build_grid(61, 1, Eigen::MatrixXd::Identity(1, 1));
  CHECK(std::abs(grid_expectation(g61, [](const Eigen::VectorXd& t) { return oracle::logistic(t[0]); }) - 0.5) < 1e-6);
  // E exp(Z) = exp(1/2)
  CHECK(std::abs(grid_expectation(g61, [](const Eigen::VectorXd& t) { return std::exp(t[0]); }) - std::exp(0.5)) < 1e-10);
}

TEST_CASE("multivariate grids reproduce the prior moments") {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.4, 0.4, 1.0;
  Eigen::MatrixXd cov3(3, 3);
  cov3 << 2.0, 0.3, -0.5, 0.3, 1.0, 0.2, -0.5, 0.2, 0.7;
  for (const Eigen::MatrixXd& c : {cov, cov3}) {
    for (int q : {15, 21}) {
      const int M = static_cast<int>(c.rows());
      QuadratureGrid g = build_grid(q, M, c);
      CHECK(g.size() == static_cast<int>(std::pow(q, M)));
      CHECK(std::abs(g.weights.sum() - 1.0) < 1e-6);
      Eigen::VectorXd mean = g.nodes.transpose() * g.weights;
      CHECK(mean.cwiseAbs().maxCoeff() < 1e-6);
      Eigen::MatrixXd second = g.nodes.transpose() * g.weights.asDiagonal() * g.nodes;
      CHECK((second - c).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("refinement leaves smooth expectations stable") {
  auto f = [](const Eigen::VectorXd& t) { return std::log(oracle::logistic(1.2 * t[0] - 0.4)); };
  const double e21 = grid_expectation(build_grid(21, 1, Eigen::MatrixXd::Identity(1, 1)), f);
  const double e41 = grid_expectation(build_grid(41, 1, Eigen::MatrixXd::Identity(1, 1)), f);
  CHECK(std::abs(e21 - e41) < 1e-6);
}

TEST_CASE("default point counts") {
  CHECK(default_quad_points(1) == 61);
  CHECK(default_quad_points(2) == 31);
  CHECK(default_quad_points(3) == 15);
}
