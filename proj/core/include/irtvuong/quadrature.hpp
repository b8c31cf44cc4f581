#pragma once

#include <functional>

#include <Eigen/Dense>

namespace irtvuong {

// Tensor-product Gauss-Hermite grid for an N(0, covariance) prior.
struct QuadratureGrid {
  int n_dims = 1;
  int points_per_dim = 0;
  Eigen::MatrixXd nodes;    // Q x M, already multiplied by the Cholesky factor
  Eigen::VectorXd weights;  // Q, sums to 1
  Eigen::MatrixXd covariance;

  int size() const { return static_cast<int>(weights.size()); }
};

struct GaussHermiteRule {
  Eigen::VectorXd nodes;    // ascending
  Eigen::VectorXd weights;  // normalized to sum 1
};

// Probabilists' rule (weight exp(-x^2/2)), Golub-Welsch with one Newton
// polish of each node.
GaussHermiteRule gauss_hermite_rule(int q);

QuadratureGrid build_grid(int q, int n_dims, const Eigen::MatrixXd& covariance);

// 61 points for one dimension, 31 per dimension for two, 15 beyond.
int default_quad_points(int n_dims);

double grid_expectation(const QuadratureGrid& grid,
                        const std::function<double(const Eigen::VectorXd&)>& f);

}  // namespace irtvuong
