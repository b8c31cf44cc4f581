#include "irtvuong/quadrature.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "irtvuong/errors.hpp"

namespace irtvuong {

namespace {

// Orthonormal probabilists' Hermite values p_0..p_n at x.
// Returns p_n and fills p_{n-1} and the Christoffel sum of p_0^2..p_{n-1}^2.
double hermite_orthonormal(int n, double x, double& p_prev, double& sum_sq) {
  double pm1 = 0.0, p = 1.0;
  sum_sq = 0.0;
  for (int k = 0; k < n; ++k) {
    sum_sq += p * p;
    const double next = (x * p - std::sqrt(double(k)) * pm1) / std::sqrt(double(k + 1));
    pm1 = p;
    p = next;
  }
  p_prev = pm1;
  return p;
}

}  // namespace

GaussHermiteRule gauss_hermite_rule(int q) {
  if (q < 1) throw InputError("quadrature needs at least one point");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(q, q);
  for (int k = 1; k < q; ++k) jacobi(k - 1, k) = jacobi(k, k - 1) = std::sqrt(double(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussHermiteRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights.resize(q);
  for (int i = 0; i < q; ++i) {
    double x = rule.nodes[i];
    double p_prev = 0.0, sum_sq = 0.0;
    double p = hermite_orthonormal(q, x, p_prev, sum_sq);
    if (q > 1) {
      // p_q'(x) = sqrt(q) p_{q-1}(x)
      x -= p / (std::sqrt(double(q)) * p_prev);
      hermite_orthonormal(q, x, p_prev, sum_sq);
    }
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / sum_sq;
  }
  rule.weights /= rule.weights.sum();
  return rule;
}

int default_quad_points(int n_dims) {
  if (n_dims <= 1) return 61;
  if (n_dims == 2) return 31;
  return 15;
}

QuadratureGrid build_grid(int q, int n_dims, const Eigen::MatrixXd& covariance) {
  if (q < 2) throw InputError("quadrature needs at least 2 points per dimension");
  if (n_dims < 1) throw InputError("grid dimension must be positive");
  if (covariance.rows() != n_dims || covariance.cols() != n_dims)
    throw InputError("covariance must be n_dims x n_dims");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success || !covariance.isApprox(covariance.transpose(), 1e-12))
    throw InputError("prior covariance is not symmetric positive definite");
  const Eigen::MatrixXd L = llt.matrixL();

  const GaussHermiteRule rule = gauss_hermite_rule(q);
  long total = 1;
  for (int m = 0; m < n_dims; ++m) total *= q;

  QuadratureGrid grid;
  grid.n_dims = n_dims;
  grid.points_per_dim = q;
  grid.covariance = covariance;
  grid.nodes.resize(total, n_dims);
  grid.weights.resize(total);
  Eigen::VectorXd z(n_dims);
  for (long idx = 0; idx < total; ++idx) {
    long rest = idx;
    double w = 1.0;
    // last dimension varies fastest
    for (int m = n_dims - 1; m >= 0; --m) {
      const int i = static_cast<int>(rest % q);
      rest /= q;
      z[m] = rule.nodes[i];
      w *= rule.weights[i];
    }
    grid.nodes.row(idx) = (L * z).transpose();
    grid.weights[idx] = w;
  }
  grid.weights /= grid.weights.sum();
  return grid;
}

double grid_expectation(const QuadratureGrid& grid,
                        const std::function<double(const Eigen::VectorXd&)>& f) {
  double total = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXd theta = grid.nodes.row(i).transpose();
    const double v = f(theta);
    if (!std::isfinite(v))
      throw NumericalError("integrand is not finite at quadrature node " + std::to_string(i));
    total += grid.weights[i] * v;
  }
  return total;
}

}  // namespace irtvuong
