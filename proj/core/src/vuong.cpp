#include "irtvuong/vuong.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "irtvuong/errors.hpp"
#include "irtvuong/quadform.hpp"

namespace irtvuong {

namespace {

constexpr double kNegativeLrTol = 1e-6;

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

void check_pair(const FittedModel& a, const FittedModel& b, const ResponseMatrix& data) {
  if (a.casewise_loglik.size() != b.casewise_loglik.size())
    throw InputError("fits were computed on different numbers of persons");
  if (a.data_fingerprint != data.fingerprint() || b.data_fingerprint != data.fingerprint())
    throw InputError("fits were not computed on the supplied data");
}

bool identical_casewise(const FittedModel& a, const FittedModel& b) {
  return a.casewise_loglik == b.casewise_loglik;
}

Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& spd, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(spd);
  const Eigen::VectorXd ev = eig.eigenvalues();
  if (!(ev.minCoeff() > 0.0))
    throw NumericalError(std::string("information matrix of model ") + what + " is singular");
  return eig.eigenvectors() * ev.cwiseInverse().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

std::string to_string(Direction d) {
  switch (d) {
    case Direction::A: return "A";
    case Direction::B: return "B";
    case Direction::Neither: return "neither";
  }
  return "?";
}

double omega2_hat(std::span<const double> ll_a, std::span<const double> ll_b) {
  if (ll_a.size() != ll_b.size()) throw InputError("casewise loglik vectors differ in length");
  if (ll_a.empty()) throw InputError("casewise loglik vectors are empty");
  const double n = static_cast<double>(ll_a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < ll_a.size(); ++i) mean += ll_a[i] - ll_b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < ll_a.size(); ++i) {
    const double d = ll_a[i] - ll_b[i] - mean;
    ss += d * d;
  }
  return std::max(0.0, ss / n);
}

double omega2_hat(const Eigen::VectorXd& ll_a, const Eigen::VectorXd& ll_b) {
  return omega2_hat(as_span(ll_a), as_span(ll_b));
}

NonNestedLr nonnested_lr(std::span<const double> ll_a, std::span<const double> ll_b, double alpha) {
  NonNestedLr out;
  out.omega2_hat = omega2_hat(ll_a, ll_b);
  double sum = 0.0;
  for (std::size_t i = 0; i < ll_a.size(); ++i) sum += ll_a[i] - ll_b[i];
  out.lr_ab = sum / std::sqrt(static_cast<double>(ll_a.size()));
  if (out.omega2_hat <= 0.0) {
    out.degenerate = true;
    return out;
  }
  out.z = out.lr_ab / std::sqrt(out.omega2_hat);
  const boost::math::normal_distribution<double> std_normal;
  out.p_a_better = boost::math::cdf(boost::math::complement(std_normal, out.z));
  out.p_b_better = boost::math::cdf(std_normal, out.z);
  out.p_two_sided = std::min(1.0, 2.0 * std::min(out.p_a_better, out.p_b_better));
  if (out.p_a_better < alpha) out.direction = Direction::A;
  else if (out.p_b_better < alpha) out.direction = Direction::B;
  return out;
}

std::vector<double> vuong_eigenvalues(const FittedModel& fit_a, const FittedModel& fit_b) {
  const int N = static_cast<int>(fit_a.casewise_scores.rows());
  const int pa = fit_a.n_params, pb = fit_b.n_params;
  if (fit_b.casewise_scores.rows() != N) throw InputError("score matrices differ in rows");
  if (fit_a.convergence.info_singular) throw NumericalError("information matrix of model A is singular");
  if (fit_b.convergence.info_singular) throw NumericalError("information matrix of model B is singular");

  Eigen::MatrixXd S(N, pa + pb);
  S << fit_a.casewise_scores, fit_b.casewise_scores;
  const Eigen::MatrixXd B = (S.transpose() * S) / static_cast<double>(N);
  Eigen::MatrixXd A_isqrt = Eigen::MatrixXd::Zero(pa + pb, pa + pb);
  if (pa > 0) A_isqrt.topLeftCorner(pa, pa) = inverse_sqrt(fit_a.observed_info / N, "A");
  if (pb > 0) A_isqrt.bottomRightCorner(pb, pb) = inverse_sqrt(fit_b.observed_info / N, "B");

  // W = E B A^-1 is similar to E C with C = A^-1/2 B A^-1/2 (E and A commute),
  // whose spectrum equals that of the symmetric C^1/2 E C^1/2.
  Eigen::MatrixXd C = A_isqrt * B * A_isqrt;
  C = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ceig(C);
  const Eigen::VectorXd croot = ceig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd Csqrt = ceig.eigenvectors() * croot.asDiagonal() * ceig.eigenvectors().transpose();
  Eigen::VectorXd e(pa + pb);
  e << Eigen::VectorXd::Ones(pa), -Eigen::VectorXd::Ones(pb);
  Eigen::MatrixXd T = Csqrt * e.asDiagonal() * Csqrt;
  T = 0.5 * (T + T.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> teig(T, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd lambda = teig.eigenvalues();
  const double cap = lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0;
  std::vector<double> out;
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    if (std::abs(lambda[i]) >= 1e-10 * cap && lambda[i] != 0.0) out.push_back(lambda[i]);
  return out;
}

DistinguishabilityResult distinguishability_test(const FittedModel& fit_a, const FittedModel& fit_b,
                                                 const ResponseMatrix& data) {
  check_pair(fit_a, fit_b, data);
  DistinguishabilityResult out;
  const int N = data.n_persons();
  if (N <= fit_a.n_params + fit_b.n_params)
    out.warnings.push_back("N does not exceed the combined parameter count; the weighted chi-square null is unreliable");
  if (!fit_a.convergence.boundary_flags.empty() || !fit_b.convergence.boundary_flags.empty())
    out.warnings.push_back("estimates near the boundary of the parameter space; regularity conditions may fail");
  if (identical_casewise(fit_a, fit_b)) {
    out.identical = true;
    return out;
  }
  out.omega2_hat = omega2_hat(fit_a.casewise_loglik, fit_b.casewise_loglik);
  out.stat = N * out.omega2_hat;
  const std::vector<double> lambda = vuong_eigenvalues(fit_a, fit_b);
  for (double l : lambda) out.weights.push_back(l * l);
  out.p = upper_tail(out.weights, out.stat);
  return out;
}

VuongResult nonnested_lr_test(const FittedModel& fit_a, const FittedModel& fit_b,
                              const ResponseMatrix& data, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  const DistinguishabilityResult dist = distinguishability_test(fit_a, fit_b, data);
  VuongResult out;
  out.alpha = alpha;
  out.omega2_hat = dist.omega2_hat;
  out.dist_stat = dist.stat;
  out.dist_weights = dist.weights;
  out.dist_p = dist.p;
  out.warnings = dist.warnings;
  out.distinguishable = dist.p < alpha;
  const NonNestedLr lr = nonnested_lr(as_span(fit_a.casewise_loglik), as_span(fit_b.casewise_loglik), alpha);
  out.lr_ab = lr.lr_ab;
  out.z = lr.z;
  out.p_a_better = lr.p_a_better;
  out.p_b_better = lr.p_b_better;
  out.p_two_sided = lr.p_two_sided;
  out.direction = lr.direction;
  out.degenerate = lr.degenerate;
  out.valid = out.distinguishable && !lr.degenerate;
  if (lr.degenerate) out.warnings.push_back("casewise loglik differences have zero variance; models indistinguishable");
  else if (!out.distinguishable)
    out.warnings.push_back("distinguishability test not significant; the non-nested LR direction is not interpretable");
  return out;
}

double chi_squared_upper(double x, int df) {
  if (df <= 0) return x > 0.0 ? 0.0 : 1.0;
  if (x <= 0.0) return 1.0;
  const boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

NestedTestResult nested_test(const FittedModel& fit_full, const FittedModel& fit_reduced,
                             const ResponseMatrix& data, bool assume_correct) {
  check_pair(fit_full, fit_reduced, data);
  NestedTestResult out;
  out.assume_correct = assume_correct;
  out.df_classical = fit_full.n_params - fit_reduced.n_params;
  if (out.df_classical <= 0)
    throw InputError("nested test needs the full model to have more parameters than the reduced model");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < fit_full.casewise_loglik.size(); ++i)
    sum += fit_full.casewise_loglik[i] - fit_reduced.casewise_loglik[i];
  out.lr_stat = 2.0 * sum;
  if (out.lr_stat < -kNegativeLrTol)
    throw NumericalError("negative nested LR statistic (" + std::to_string(out.lr_stat) +
                         "): models are not nested or a fit did not converge");
  out.lr_stat = std::max(0.0, out.lr_stat);
  if (identical_casewise(fit_full, fit_reduced) || out.lr_stat == 0.0) {
    out.p_weighted = out.p_classical = out.p = 1.0;
    return out;
  }
  out.weights = vuong_eigenvalues(fit_full, fit_reduced);
  out.p_weighted = upper_tail(out.weights, out.lr_stat);
  out.p_classical = chi_squared_upper(out.lr_stat, out.df_classical);
  out.p = assume_correct ? out.p_classical : out.p_weighted;
  return out;
}

LrtResult traditional_lrt(double loglik_full, double loglik_reduced, int df) {
  if (df <= 0) throw InputError("likelihood ratio test needs a positive df");
  LrtResult out;
  out.df = df;
  out.stat = 2.0 * (loglik_full - loglik_reduced);
  if (out.stat < -kNegativeLrTol)
    throw NumericalError("negative likelihood ratio statistic: models are not nested or a fit did not converge");
  out.stat = std::max(0.0, out.stat);
  out.p = chi_squared_upper(out.stat, df);
  return out;
}

LrtResult traditional_lrt(const FittedModel& fit_full, const FittedModel& fit_reduced) {
  return traditional_lrt(fit_full.total_loglik, fit_reduced.total_loglik,
                         fit_full.n_params - fit_reduced.n_params);
}

double aic(double loglik, int n_params) { return -2.0 * loglik + 2.0 * n_params; }
double bic(double loglik, int n_params, int n) {
  if (n < 1) throw InputError("BIC needs a positive sample size");
  return -2.0 * loglik + n_params * std::log(static_cast<double>(n));
}
double aic(const FittedModel& fit) { return aic(fit.total_loglik, fit.n_params); }
double bic(const FittedModel& fit, int n) { return bic(fit.total_loglik, fit.n_params, n); }

}  // namespace irtvuong
