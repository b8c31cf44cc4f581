#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irtvuong/data.hpp"
#include "irtvuong/estimation.hpp"

namespace irtvuong {

enum class Direction { A, B, Neither };
std::string to_string(Direction d);

// Variance of the casewise loglik differences, divisor N.
double omega2_hat(std::span<const double> ll_a, std::span<const double> ll_b);
double omega2_hat(const Eigen::VectorXd& ll_a, const Eigen::VectorXd& ll_b);

// Non-nested LR statistic from casewise logliks alone.
struct NonNestedLr {
  double lr_ab = 0.0;  // sum(ll_a - ll_b) / sqrt(N)
  double omega2_hat = 0.0;
  double z = 0.0;
  double p_a_better = 0.5;
  double p_b_better = 0.5;
  double p_two_sided = 1.0;
  Direction direction = Direction::Neither;
  bool degenerate = false;  // omega2_hat == 0, z undefined
};
NonNestedLr nonnested_lr(std::span<const double> ll_a, std::span<const double> ll_b, double alpha);

// Eigenvalues of W = E B A^{-1}, A = blockdiag(I_a, I_b) / N, B the scaled
// cross-product of the stacked scores [s_a, s_b], E = blockdiag(I, -I).
// Numerical zeros (|lambda| < 1e-10 max |lambda|) are removed.
std::vector<double> vuong_eigenvalues(const FittedModel& fit_a, const FittedModel& fit_b);

struct DistinguishabilityResult {
  double omega2_hat = 0.0;
  double stat = 0.0;  // N * omega2_hat
  std::vector<double> weights;  // squared eigenvalues
  double p = 1.0;
  bool identical = false;  // casewise logliks coincide exactly
  std::vector<std::string> warnings;
};
DistinguishabilityResult distinguishability_test(const FittedModel& fit_a, const FittedModel& fit_b,
                                                 const ResponseMatrix& data);

struct VuongResult {
  double omega2_hat = 0.0;
  double dist_stat = 0.0;
  std::vector<double> dist_weights;
  double dist_p = 1.0;
  double lr_ab = 0.0;
  double z = 0.0;
  double p_two_sided = 1.0;
  double p_a_better = 0.5;
  double p_b_better = 0.5;
  Direction direction = Direction::Neither;
  double alpha = 0.05;
  bool distinguishable = false;  // dist_p < alpha
  bool valid = false;            // LR direction interpretable (distinguishable first)
  bool degenerate = false;
  std::vector<std::string> warnings;
};
VuongResult nonnested_lr_test(const FittedModel& fit_a, const FittedModel& fit_b,
                              const ResponseMatrix& data, double alpha = 0.05);

struct NestedTestResult {
  double lr_stat = 0.0;  // 2 * sum(ll_full - ll_reduced)
  std::vector<double> weights;
  double p_weighted = 1.0;
  double p_classical = 1.0;
  int df_classical = 0;
  bool assume_correct = false;
  double p = 1.0;  // p_classical when assume_correct, else p_weighted
  std::vector<std::string> warnings;
};
NestedTestResult nested_test(const FittedModel& fit_full, const FittedModel& fit_reduced,
                             const ResponseMatrix& data, bool assume_correct = false);

struct LrtResult {
  double stat = 0.0;
  int df = 0;
  double p = 1.0;
};
LrtResult traditional_lrt(const FittedModel& fit_full, const FittedModel& fit_reduced);
LrtResult traditional_lrt(double loglik_full, double loglik_reduced, int df);

double chi_squared_upper(double x, int df);

double aic(const FittedModel& fit);
double bic(const FittedModel& fit, int n);
double aic(double loglik, int n_params);
double bic(double loglik, int n_params, int n);

}  // namespace irtvuong
