#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irtvuong/data.hpp"

namespace irtvuong {

// Model families. ThreePLFixedG is supported for data generation only.
enum class Family { Grm, Gpcm, TwoPL, Rasch, MdTwoPL, ThreePLFixedG };

// Per-item link. For two categories Graded and PartialCredit coincide with the
// 2PL logistic; Guessing is the lower-asymptote logistic of the 3PL.
enum class Link { Graded, PartialCredit, Guessing };

std::string to_string(Family family);
Family family_from_string(const std::string& name);
std::string to_string(Link link);

struct SlopeConstraint {
  enum class Kind { Free, Fixed, Equal };
  Kind kind = Kind::Free;
  double value = 0.0;  // Fixed
  int eq_class = -1;   // Equal: items sharing a class share one parameter

  static SlopeConstraint free() { return {}; }
  static SlopeConstraint fixed(double v) { return {Kind::Fixed, v, -1}; }
  static SlopeConstraint equal(int cls) { return {Kind::Equal, 0.0, cls}; }
  bool operator==(const SlopeConstraint&) const = default;
};

// Latent trait distribution N(0, Sigma).
enum class LatentStructure {
  Identity,          // Sigma = I
  FreeVariance,      // M = 1, Sigma = sigma^2 estimated (Rasch)
  FixedCorrelation,  // Sigma = given correlation matrix
};

struct ModelSpec {
  Family family = Family::TwoPL;
  int n_dims = 1;
  std::vector<int> categories;                        // K_j
  std::vector<std::vector<SlopeConstraint>> slopes;   // [item][dim]
  std::vector<Link> links;                            // [item]
  LatentStructure latent = LatentStructure::Identity;
  Eigen::MatrixXd correlation;                        // FixedCorrelation only
  double guessing = 0.0;                              // ThreePLFixedG only
  std::string label;

  int n_items() const { return static_cast<int>(categories.size()); }
  DataShape shape() const { return DataShape{categories}; }

  // Covariance of the quadrature prior. FreeVariance returns the unit
  // variance; the estimated variance enters through the slopes.
  Eigen::MatrixXd prior_covariance() const;

  // Structural checks (shapes, Rasch and identification invariants).
  void validate() const;
  // validate() plus the requirements for marginal ML fitting.
  void validate_fittable() const;
};

// Default spec of a family over a data shape. Multidimensional families get
// the exploratory identification: in dimension m (0-based) the slopes of the
// last m items are fixed at zero.
ModelSpec make_spec(Family family, const DataShape& shape, int n_dims = 1, double guessing = 0.0);

void set_slope(ModelSpec& spec, std::span<const int> items, int dim, SlopeConstraint constraint);

// Natural parameters of one item: logit = intercept_k + slopes' theta.
struct ItemParams {
  Link link = Link::Graded;
  Eigen::VectorXd slopes;      // length M
  Eigen::VectorXd intercepts;  // length K - 1
  double guessing = 0.0;

  int categories() const { return static_cast<int>(intercepts.size()) + 1; }
  int n_natural() const { return static_cast<int>(slopes.size() + intercepts.size()); }
};

// Category probabilities of one item at theta. Throws ParameterError when
// GRM thresholds are unordered (a category probability would be negative).
Eigen::VectorXd item_category_probs(const ItemParams& item, const Eigen::VectorXd& theta);

// K x (M + K - 1) Jacobian of the category probabilities w.r.t. the item's
// natural parameters (slopes first, then intercepts).
Eigen::MatrixXd item_category_prob_grad(const ItemParams& item, const Eigen::VectorXd& theta);

// GRM validity: cumulative intercepts strictly decreasing.
bool item_params_valid(const ItemParams& item);

using ParameterVector = Eigen::VectorXd;

// Where one natural parameter's value comes from.
//   index >= 0, !scaled : value = x[index]
//   index <  0, !scaled : value = base
//   scaled              : value = base * sqrt(x[variance_index])
struct NaturalSlot {
  int index = -1;
  double base = 0.0;
  bool scaled = false;
};

struct UnpackedParams {
  std::vector<ItemParams> items;  // effective slopes (already scaled)
  double variance = 1.0;
};

// Packing map between the free-parameter vector and per-item natural
// parameters. Order: per item, free slopes then intercepts; equality classes
// take their index at first appearance; the latent variance (if free) last.
class ParameterLayout {
 public:
  explicit ParameterLayout(const ModelSpec& spec);

  int size() const { return n_params_; }
  int n_items() const { return static_cast<int>(items_.size()); }
  int n_dims() const { return n_dims_; }
  int variance_index() const { return variance_index_; }
  int categories(int item) const { return categories_[static_cast<std::size_t>(item)]; }
  Link link(int item) const { return links_[static_cast<std::size_t>(item)]; }

  std::span<const NaturalSlot> slots(int item) const { return items_[static_cast<std::size_t>(item)]; }
  const std::vector<std::string>& labels() const { return labels_; }

  double natural_value(const NaturalSlot& slot, const ParameterVector& x) const;
  ItemParams item(int j, const ParameterVector& x) const;
  UnpackedParams unpack(const ParameterVector& x) const;
  ParameterVector pack(const UnpackedParams& params) const;

  // Interior of the parameter space: ordered GRM thresholds, positive
  // variance, finite values.
  bool valid(const ParameterVector& x) const;

 private:
  int n_params_ = 0;
  int n_dims_ = 1;
  int variance_index_ = -1;
  double guessing_ = 0.0;
  std::vector<int> categories_;
  std::vector<Link> links_;
  std::vector<std::vector<NaturalSlot>> items_;
  std::vector<std::string> labels_;
};

// Spec-level convenience wrappers.
Eigen::VectorXd category_probs(const ModelSpec& spec, const ParameterVector& x, int item,
                               const Eigen::VectorXd& theta);
// K_j x P_item Jacobian w.r.t. the item's free parameters, columns in the
// order returned by item_free_parameters().
Eigen::MatrixXd category_prob_grad(const ModelSpec& spec, const ParameterVector& x, int item,
                                   const Eigen::VectorXd& theta);
std::vector<int> item_free_parameters(const ParameterLayout& layout, int item);

namespace detail {

// Clamp applied to probabilities before logs and divisions.
inline constexpr double kProbFloor = 1e-300;
inline constexpr double kProbCeil = 1.0 - 1e-16;

// Category probabilities and derivatives of log P(X = k) with respect to the
// reduced coordinates rho = (s, beta_1, ..., beta_{K-1}), s = a' theta.
// prob: K; d1: K x K row-major [k][t]; d2 (optional): K x K x K [k][t][u].
// Probabilities are clamped; no validity check is made here.
void log_prob_derivatives(Link link, int K, const double* beta, double s, double guessing,
                          double* prob, double* d1, double* d2);

// Category probabilities only (clamped), used by the E-step tables.
void category_probs_at(Link link, int K, const double* beta, double s, double guessing,
                       double* prob);

}  // namespace detail

}  // namespace irtvuong
