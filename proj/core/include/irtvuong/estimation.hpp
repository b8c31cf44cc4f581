#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irtvuong/data.hpp"
#include "irtvuong/models.hpp"
#include "irtvuong/quadrature.hpp"

namespace irtvuong {

struct EmConfig {
  int max_cycles = 5000;
  double param_tol = 1e-4;
  int quad_points = 0;  // per dimension; 0 selects default_quad_points(M)
  // Stationarity requirement checked together with param_tol:
  // max |sum of scores| < grad_tol_factor * sqrt(N).
  double grad_tol_factor = 1e-3;
  bool accelerate = true;  // SQUAREM extrapolation between plain EM steps
  int max_newton = 50;     // inner M-step iterations
  // After this many EM cycles without convergence, and again every time the
  // same number elapses, Newton steps on the marginal loglik (Oakes
  // information, line search) are tried. 0 disables them.
  int polish_after = 100;
  // Fitting stops without convergence once any natural slope or intercept
  // exceeds this magnitude (estimates running off along a ridge).
  double divergence_bound = 50.0;
  bool compute_information = true;
};

struct Convergence {
  bool converged = false;
  int cycles = 0;  // EM cycles plus Newton polish steps
  int newton_steps = 0;
  double max_param_change = 0.0;
  double max_abs_gradient = 0.0;
  double info_condition_number = 0.0;  // +inf when not positive definite
  bool info_singular = false;
  bool diverged = false;  // stopped by EmConfig::divergence_bound
  std::vector<std::string> boundary_flags;
  std::vector<double> loglik_trace;  // total loglik at every accepted iterate
};

struct FittedModel {
  ModelSpec spec;
  ParameterVector estimates;
  std::vector<std::string> labels;
  Eigen::VectorXd casewise_loglik;   // N, person order of the data
  double total_loglik = 0.0;         // sum of casewise_loglik in person order
  Eigen::MatrixXd casewise_scores;   // N x P
  Eigen::MatrixXd observed_info;     // P x P
  int n_params = 0;
  int n_persons = 0;
  int quad_points = 0;
  std::uint64_t data_fingerprint = 0;
  Convergence convergence;
};

struct LoglikResult {
  double total = 0.0;
  Eigen::VectorXd casewise;
};

// Marginal log-likelihood under the model's quadrature prior.
LoglikResult marginal_loglik(const ModelSpec& spec, const ParameterVector& params,
                             const ResponseMatrix& data, int quad_points = 0);

// Deterministic starting values (slopes 1 or their fixed value, intercepts
// from marginal category logits, variance 1).
ParameterVector start_values(const ModelSpec& spec, const ResponseMatrix& data);

FittedModel fit_em(const ModelSpec& spec, const ResponseMatrix& data, const EmConfig& config = {});

// Louis-identity scores at the fitted estimates, N x P.
Eigen::MatrixXd casewise_scores(const FittedModel& fitted, const ResponseMatrix& data);

// Oakes-identity observed information at the fitted estimates, P x P.
Eigen::MatrixXd observed_information(const FittedModel& fitted, const ResponseMatrix& data);

// Condition number of a symmetric matrix (max/min eigenvalue); +inf when the
// smallest eigenvalue is not positive.
double condition_number(const Eigen::MatrixXd& symmetric);

// Low-level engine shared by fitting, scoring and the information matrix.
// Exposed for tests and benchmarks.
class MarginalEngine {
 public:
  MarginalEngine(const ModelSpec& spec, const ResponseMatrix& data, int quad_points = 0);
  ~MarginalEngine();
  MarginalEngine(MarginalEngine&&) noexcept;
  MarginalEngine& operator=(MarginalEngine&&) noexcept;

  const ParameterLayout& layout() const;
  const QuadratureGrid& grid() const;
  int n_patterns() const;

  // E-step at x: posterior weights and expected counts are cached.
  // Returns the total marginal loglik.
  double e_step(const ParameterVector& x);
  // Casewise loglik (person order) from the last e_step.
  Eigen::VectorXd casewise_loglik() const;

  // Expected complete-data loglik Q(x | cached counts) and its derivatives.
  double q_value(const ParameterVector& x) const;
  Eigen::VectorXd q_gradient(const ParameterVector& x) const;
  Eigen::MatrixXd q_hessian(const ParameterVector& x) const;

  // Maximizes Q(. | cached counts) from `start` by damped Newton.
  ParameterVector m_step(const ParameterVector& start, int max_newton) const;

  // Louis scores (person order) at the parameter of the last e_step.
  Eigen::MatrixXd scores() const;

  // Oakes-identity information at x (leaves the E-step cached at x).
  Eigen::MatrixXd observed_information(const ParameterVector& x);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace irtvuong
