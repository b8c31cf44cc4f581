#include "irtvuong/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "irtvuong/errors.hpp"

namespace irtvuong {

namespace {

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clamp_prob(double p) { return std::clamp(p, detail::kProbFloor, detail::kProbCeil); }

bool dichotomous_only(Family f) {
  return f == Family::TwoPL || f == Family::Rasch || f == Family::MdTwoPL ||
         f == Family::ThreePLFixedG;
}

// Raw GRM category probabilities from cumulative logits eta_1 > ... > eta_{K-1}.
// Uses whichever tail keeps the subtraction well conditioned.
void grm_probs(int K, const double* beta, double s, double* prob) {
  for (int k = 0; k < K; ++k) {
    if (k == 0) {
      prob[k] = logistic(-(beta[0] + s));
    } else if (k == K - 1) {
      prob[k] = logistic(beta[K - 2] + s);
    } else {
      const double upper = beta[k - 1] + s;  // P(X >= k)
      const double lower = beta[k] + s;      // P(X >= k+1)
      prob[k] = lower > 0 ? logistic(-lower) - logistic(-upper) : logistic(upper) - logistic(lower);
    }
  }
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::Grm: return "GRM";
    case Family::Gpcm: return "GPCM";
    case Family::TwoPL: return "2PL";
    case Family::Rasch: return "RASCH";
    case Family::MdTwoPL: return "MD2PL";
    case Family::ThreePLFixedG: return "3PL_FIXED_G";
  }
  return "?";
}

Family family_from_string(const std::string& name) {
  std::string up;
  for (char c : name) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up == "GRM") return Family::Grm;
  if (up == "GPCM") return Family::Gpcm;
  if (up == "2PL" || up == "2PLM" || up == "TWO_PL") return Family::TwoPL;
  if (up == "RASCH" || up == "RM") return Family::Rasch;
  if (up == "MD2PL" || up == "MD_TWO_PL" || up == "MD-2PL") return Family::MdTwoPL;
  if (up == "3PL_FIXED_G" || up == "THREE_PL_FIXED_G") return Family::ThreePLFixedG;
  throw InputError("unknown model family '" + name + "'");
}

std::string to_string(Link link) {
  switch (link) {
    case Link::Graded: return "graded";
    case Link::PartialCredit: return "partial_credit";
    case Link::Guessing: return "guessing";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ModelSpec

Eigen::MatrixXd ModelSpec::prior_covariance() const {
  if (latent == LatentStructure::FixedCorrelation) return correlation;
  return Eigen::MatrixXd::Identity(n_dims, n_dims);
}

void ModelSpec::validate() const {
  const int J = n_items();
  if (J < 1) throw SpecError("model has no items");
  if (n_dims < 1) throw SpecError("n_dims must be >= 1");
  if (static_cast<int>(slopes.size()) != J || static_cast<int>(links.size()) != J)
    throw SpecError("slope/link tables do not match the item count");
  for (int j = 0; j < J; ++j) {
    if (categories[static_cast<std::size_t>(j)] < 2)
      throw SpecError("item " + std::to_string(j + 1) + " needs at least 2 categories");
    if (categories[static_cast<std::size_t>(j)] > 64)
      throw SpecError("item " + std::to_string(j + 1) + " has more than 64 categories");
    if (static_cast<int>(slopes[static_cast<std::size_t>(j)].size()) != n_dims)
      throw SpecError("item " + std::to_string(j + 1) + " slope row has wrong length");
    if (links[static_cast<std::size_t>(j)] == Link::Guessing && categories[static_cast<std::size_t>(j)] != 2)
      throw SpecError("guessing link requires dichotomous items");
  }
  if (dichotomous_only(family)) {
    for (int k : categories)
      if (k != 2) throw SpecError(to_string(family) + " requires dichotomous items");
  }
  if (family == Family::Rasch) {
    if (n_dims != 1) throw SpecError("RASCH is unidimensional");
    bool all_unit = true;
    int cls = -2;
    bool one_class = true;
    for (const auto& row : slopes) {
      const auto& c = row[0];
      if (!(c.kind == SlopeConstraint::Kind::Fixed && c.value == 1.0)) all_unit = false;
      if (c.kind != SlopeConstraint::Kind::Equal) {
        one_class = false;
      } else if (cls == -2) {
        cls = c.eq_class;
      } else if (cls != c.eq_class) {
        one_class = false;
      }
    }
    if (!all_unit && !one_class)
      throw SpecError("RASCH slopes must be fixed at 1 or share one equality class");
    if (all_unit && latent != LatentStructure::FreeVariance)
      throw SpecError("RASCH with unit slopes needs a free latent variance");
  }
  if (latent == LatentStructure::FreeVariance && n_dims != 1)
    throw SpecError("a free latent variance is only supported for unidimensional models");
  if (latent == LatentStructure::FixedCorrelation) {
    if (correlation.rows() != n_dims || correlation.cols() != n_dims)
      throw SpecError("latent correlation matrix must be n_dims x n_dims");
    if (!correlation.isApprox(correlation.transpose(), 1e-12))
      throw SpecError("latent correlation matrix must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(correlation);
    if (llt.info() != Eigen::Success) throw SpecError("latent correlation matrix is not positive definite");
  }
  if (family == Family::ThreePLFixedG && !(guessing >= 0.0 && guessing < 1.0))
    throw SpecError("guessing parameter must lie in [0, 1)");
}

void ModelSpec::validate_fittable() const {
  validate();
  if (family == Family::ThreePLFixedG ||
      std::any_of(links.begin(), links.end(), [](Link l) { return l == Link::Guessing; }))
    throw SpecError("models with a lower asymptote are supported for data generation only");
  if (latent == LatentStructure::FreeVariance) {
    for (const auto& row : slopes)
      if (row[0].kind != SlopeConstraint::Kind::Fixed)
        throw SpecError("unidentified: free latent variance requires all slopes fixed");
  }
  // Rotational indeterminacy: dimension m needs at least m fixed slopes.
  for (int m = 1; m < n_dims; ++m) {
    int fixed = 0;
    for (const auto& row : slopes)
      if (row[static_cast<std::size_t>(m)].kind == SlopeConstraint::Kind::Fixed) ++fixed;
    if (fixed < m)
      throw SpecError("unidentified: dimension " + std::to_string(m + 1) + " needs at least " +
                      std::to_string(m) + " fixed slopes");
  }
}

ModelSpec make_spec(Family family, const DataShape& shape, int n_dims, double guessing) {
  ModelSpec spec;
  spec.family = family;
  spec.categories = shape.categories;
  const int J = shape.n_items();
  spec.n_dims = (family == Family::MdTwoPL && n_dims < 2) ? 2 : n_dims;
  if (family == Family::TwoPL || family == Family::Rasch || family == Family::ThreePLFixedG)
    spec.n_dims = 1;
  const auto M = static_cast<std::size_t>(spec.n_dims);
  spec.slopes.assign(static_cast<std::size_t>(J), std::vector<SlopeConstraint>(M));
  Link link = family == Family::Gpcm ? Link::PartialCredit : Link::Graded;
  if (family == Family::ThreePLFixedG) link = Link::Guessing;
  spec.links.assign(static_cast<std::size_t>(J), link);

  switch (family) {
    case Family::Rasch:
      for (auto& row : spec.slopes) row[0] = SlopeConstraint::fixed(1.0);
      spec.latent = LatentStructure::FreeVariance;
      break;
    case Family::ThreePLFixedG:
      for (auto& row : spec.slopes) row[0] = SlopeConstraint::fixed(1.0);
      spec.guessing = guessing;
      break;
    default:
      for (std::size_t m = 1; m < M; ++m)
        for (std::size_t i = 0; i < m && i < static_cast<std::size_t>(J); ++i)
          spec.slopes[static_cast<std::size_t>(J) - 1 - i][m] = SlopeConstraint::fixed(0.0);
      break;
  }
  spec.label = to_string(family);
  if (spec.n_dims > 1 && family != Family::MdTwoPL)
    spec.label = std::to_string(spec.n_dims) + "d-" + spec.label;
  return spec;
}

void set_slope(ModelSpec& spec, std::span<const int> items, int dim, SlopeConstraint constraint) {
  if (dim < 0 || dim >= spec.n_dims) throw SpecError("slope dimension out of range");
  for (int j : items) {
    if (j < 0 || j >= spec.n_items()) throw SpecError("slope item index out of range");
    spec.slopes[static_cast<std::size_t>(j)][static_cast<std::size_t>(dim)] = constraint;
  }
}

// ---------------------------------------------------------------------------
// Item-level probabilities and derivatives

namespace detail {

void category_probs_at(Link link, int K, const double* beta, double s, double guessing,
                       double* prob) {
  switch (link) {
    case Link::Graded:
      grm_probs(K, beta, s, prob);
      break;
    case Link::PartialCredit: {
      double z[64];
      double zmax = 0.0;
      z[0] = 0.0;
      for (int k = 1; k < K; ++k) {
        z[k] = z[k - 1] + beta[k - 1] + s;
        zmax = std::max(zmax, z[k]);
      }
      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        prob[k] = std::exp(z[k] - zmax);
        total += prob[k];
      }
      for (int k = 0; k < K; ++k) prob[k] /= total;
      break;
    }
    case Link::Guessing: {
      const double p1 = guessing + (1.0 - guessing) * logistic(beta[0] + s);
      prob[1] = p1;
      prob[0] = (1.0 - guessing) * logistic(-(beta[0] + s));
      break;
    }
  }
  for (int k = 0; k < K; ++k) prob[k] = clamp_prob(prob[k]);
}

void log_prob_derivatives(Link link, int K, const double* beta, double s, double guessing,
                          double* prob, double* d1, double* d2) {
  const int R = K;  // rho = (s, beta_1..beta_{K-1})
  if (link == Link::PartialCredit) {
    category_probs_at(link, K, beta, s, guessing, prob);
    // dz_k/drho: s-coefficient k, beta_l coefficient 1[l < k]
    double mean[64] = {};
    for (int k = 0; k < K; ++k) {
      mean[0] += prob[k] * k;
      for (int l = 0; l < k; ++l) mean[1 + l] += prob[k];
    }
    auto dz = [](int k, int t) -> double { return t == 0 ? double(k) : (t - 1 < k ? 1.0 : 0.0); };
    for (int k = 0; k < K; ++k)
      for (int t = 0; t < R; ++t) d1[k * R + t] = dz(k, t) - mean[t];
    if (d2) {
      double cov[64 * 64];
      for (int t = 0; t < R; ++t)
        for (int u = 0; u < R; ++u) {
          double c = 0.0;
          for (int h = 0; h < K; ++h) c += prob[h] * (dz(h, t) - mean[t]) * (dz(h, u) - mean[u]);
          cov[t * R + u] = c;
        }
      for (int k = 0; k < K; ++k)
        for (int t = 0; t < R * R; ++t) d2[k * R * R + t] = -cov[t];
    }
    return;
  }

  // Graded and guessing links: P_k = c_k - c_{k+1} with c the cumulative
  // curve, c_0 = 1, c_K = 0. Cumulative l (1..K-1) depends on rho through
  // eta_l = beta_l + s with gradient v_l = e_0 + e_l.
  double raw[64];
  double dc[64];   // dc_l/deta_l
  double d2c[64];  // d2c_l/deta_l^2
  if (link == Link::Guessing) {
    grm_probs(2, beta, s, raw);  // not used for values below
    const double eta = beta[0] + s;
    const double sp = logistic(eta), sm = logistic(-eta);
    raw[1] = guessing + (1.0 - guessing) * sp;
    raw[0] = (1.0 - guessing) * sm;
    dc[1] = (1.0 - guessing) * sp * sm;
    d2c[1] = dc[1] * (sm - sp);
  } else {
    grm_probs(K, beta, s, raw);
    for (int l = 1; l < K; ++l) {
      const double eta = beta[l - 1] + s;
      const double sp = logistic(eta), sm = logistic(-eta);
      dc[l] = sp * sm;
      d2c[l] = dc[l] * (sm - sp);
    }
  }
  for (int k = 0; k < K; ++k) prob[k] = clamp_prob(raw[k]);

  for (int k = 0; k < K; ++k) {
    double dp[64] = {};
    // + dc_k v_k (k >= 1), - dc_{k+1} v_{k+1} (k+1 <= K-1)
    if (k >= 1) {
      dp[0] += dc[k];
      dp[k] += dc[k];
    }
    if (k + 1 <= K - 1) {
      dp[0] -= dc[k + 1];
      dp[k + 1] -= dc[k + 1];
    }
    const double inv = 1.0 / prob[k];
    for (int t = 0; t < R; ++t) d1[k * R + t] = dp[t] * inv;
    if (d2) {
      double* h = d2 + k * R * R;
      for (int t = 0; t < R * R; ++t) h[t] = 0.0;
      auto add_outer = [&](int l, double w) {
        // w * v_l v_l^T with v_l = e_0 + e_l
        h[0] += w;
        h[l] += w;
        h[l * R] += w;
        h[l * R + l] += w;
      };
      if (k >= 1) add_outer(k, d2c[k] * inv);
      if (k + 1 <= K - 1) add_outer(k + 1, -d2c[k + 1] * inv);
      for (int t = 0; t < R; ++t)
        for (int u = 0; u < R; ++u) h[t * R + u] -= d1[k * R + t] * d1[k * R + u];
    }
  }
}

}  // namespace detail

bool item_params_valid(const ItemParams& item) {
  if (!item.slopes.allFinite() || !item.intercepts.allFinite()) return false;
  if (item.link == Link::Graded) {
    for (Eigen::Index l = 1; l < item.intercepts.size(); ++l)
      if (!(item.intercepts[l] < item.intercepts[l - 1])) return false;
  }
  return true;
}

Eigen::VectorXd item_category_probs(const ItemParams& item, const Eigen::VectorXd& theta) {
  if (theta.size() != item.slopes.size()) throw ParameterError("theta dimension mismatch");
  if (!theta.allFinite()) throw ParameterError("theta must be finite");
  if (!item_params_valid(item))
    throw ParameterError("invalid item parameters: GRM thresholds must be strictly decreasing");
  const int K = item.categories();
  Eigen::VectorXd p(K);
  detail::category_probs_at(item.link, K, item.intercepts.data(), item.slopes.dot(theta),
                            item.guessing, p.data());
  return p;
}

Eigen::MatrixXd item_category_prob_grad(const ItemParams& item, const Eigen::VectorXd& theta) {
  if (theta.size() != item.slopes.size()) throw ParameterError("theta dimension mismatch");
  if (!item_params_valid(item))
    throw ParameterError("invalid item parameters: GRM thresholds must be strictly decreasing");
  const int K = item.categories();
  const auto M = item.slopes.size();
  std::vector<double> prob(static_cast<std::size_t>(K)), d1(static_cast<std::size_t>(K * K));
  detail::log_prob_derivatives(item.link, K, item.intercepts.data(), item.slopes.dot(theta),
                               item.guessing, prob.data(), d1.data(), nullptr);
  Eigen::MatrixXd grad(K, M + K - 1);
  for (int k = 0; k < K; ++k) {
    const double pk = prob[static_cast<std::size_t>(k)];
    const double ds = pk * d1[static_cast<std::size_t>(k * K)];
    for (Eigen::Index m = 0; m < M; ++m) grad(k, m) = ds * theta[m];
    for (int l = 1; l < K; ++l) grad(k, M + l - 1) = pk * d1[static_cast<std::size_t>(k * K + l)];
  }
  return grad;
}

// ---------------------------------------------------------------------------
// ParameterLayout

ParameterLayout::ParameterLayout(const ModelSpec& spec)
    : n_dims_(spec.n_dims), guessing_(spec.guessing), categories_(spec.categories), links_(spec.links) {
  spec.validate();
  const int J = spec.n_items();
  const bool free_var = spec.latent == LatentStructure::FreeVariance;
  std::map<int, int> class_index;
  items_.resize(static_cast<std::size_t>(J));
  auto item_label = [](int j) { return "item" + std::to_string(j + 1); };
  for (int j = 0; j < J; ++j) {
    auto& slots = items_[static_cast<std::size_t>(j)];
    for (int m = 0; m < n_dims_; ++m) {
      const auto& c = spec.slopes[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)];
      NaturalSlot slot;
      switch (c.kind) {
        case SlopeConstraint::Kind::Fixed:
          slot.base = c.value;
          slot.scaled = free_var;
          break;
        case SlopeConstraint::Kind::Free:
          slot.index = n_params_++;
          labels_.push_back(item_label(j) + ".a" + std::to_string(m + 1));
          break;
        case SlopeConstraint::Kind::Equal: {
          auto it = class_index.find(c.eq_class);
          if (it == class_index.end()) {
            it = class_index.emplace(c.eq_class, n_params_++).first;
            labels_.push_back("a_class" + std::to_string(c.eq_class));
          }
          slot.index = it->second;
          break;
        }
      }
      slots.push_back(slot);
    }
    for (int k = 1; k < spec.categories[static_cast<std::size_t>(j)]; ++k) {
      NaturalSlot slot;
      slot.index = n_params_++;
      labels_.push_back(item_label(j) + ".d" + std::to_string(k));
      slots.push_back(slot);
    }
  }
  if (free_var) {
    variance_index_ = n_params_++;
    labels_.push_back("latent.var");
  }
}

double ParameterLayout::natural_value(const NaturalSlot& slot, const ParameterVector& x) const {
  if (slot.scaled) return slot.base * std::sqrt(x[variance_index_]);
  return slot.index >= 0 ? x[slot.index] : slot.base;
}

ItemParams ParameterLayout::item(int j, const ParameterVector& x) const {
  ItemParams p;
  p.link = links_[static_cast<std::size_t>(j)];
  p.guessing = guessing_;
  const auto& slots = items_[static_cast<std::size_t>(j)];
  p.slopes.resize(n_dims_);
  p.intercepts.resize(static_cast<Eigen::Index>(slots.size()) - n_dims_);
  for (int t = 0; t < static_cast<int>(slots.size()); ++t) {
    const double v = natural_value(slots[static_cast<std::size_t>(t)], x);
    if (t < n_dims_)
      p.slopes[t] = v;
    else
      p.intercepts[t - n_dims_] = v;
  }
  return p;
}

UnpackedParams ParameterLayout::unpack(const ParameterVector& x) const {
  if (x.size() != n_params_) throw ParameterError("parameter vector has wrong length");
  UnpackedParams out;
  out.items.reserve(items_.size());
  for (int j = 0; j < n_items(); ++j) out.items.push_back(item(j, x));
  out.variance = variance_index_ >= 0 ? x[variance_index_] : 1.0;
  return out;
}

ParameterVector ParameterLayout::pack(const UnpackedParams& params) const {
  if (static_cast<int>(params.items.size()) != n_items()) throw ParameterError("item count mismatch");
  ParameterVector x = ParameterVector::Zero(n_params_);
  for (int j = 0; j < n_items(); ++j) {
    const auto& slots = items_[static_cast<std::size_t>(j)];
    const auto& it = params.items[static_cast<std::size_t>(j)];
    for (int t = 0; t < static_cast<int>(slots.size()); ++t) {
      const auto& slot = slots[static_cast<std::size_t>(t)];
      if (slot.index < 0 || slot.scaled) continue;
      x[slot.index] = t < n_dims_ ? it.slopes[t] : it.intercepts[t - n_dims_];
    }
  }
  if (variance_index_ >= 0) x[variance_index_] = params.variance;
  return x;
}

bool ParameterLayout::valid(const ParameterVector& x) const {
  if (x.size() != n_params_ || !x.allFinite()) return false;
  if (variance_index_ >= 0 && !(x[variance_index_] > 0.0)) return false;
  for (int j = 0; j < n_items(); ++j) {
    if (links_[static_cast<std::size_t>(j)] != Link::Graded) continue;
    const auto& slots = items_[static_cast<std::size_t>(j)];
    for (std::size_t t = static_cast<std::size_t>(n_dims_) + 1; t < slots.size(); ++t)
      if (!(natural_value(slots[t], x) < natural_value(slots[t - 1], x))) return false;
  }
  return true;
}

std::vector<int> item_free_parameters(const ParameterLayout& layout, int item) {
  std::vector<int> idx;
  for (const auto& slot : layout.slots(item)) {
    if (slot.scaled) idx.push_back(layout.variance_index());
    else if (slot.index >= 0) idx.push_back(slot.index);
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

Eigen::VectorXd category_probs(const ModelSpec& spec, const ParameterVector& x, int item,
                               const Eigen::VectorXd& theta) {
  ParameterLayout layout(spec);
  if (!layout.valid(x)) throw ParameterError("parameter vector outside the valid region");
  return item_category_probs(layout.item(item, x), theta);
}

Eigen::MatrixXd category_prob_grad(const ModelSpec& spec, const ParameterVector& x, int item,
                                   const Eigen::VectorXd& theta) {
  ParameterLayout layout(spec);
  if (!layout.valid(x)) throw ParameterError("parameter vector outside the valid region");
  const ItemParams params = layout.item(item, x);
  const Eigen::MatrixXd natural = item_category_prob_grad(params, theta);
  const auto free = item_free_parameters(layout, item);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(natural.rows(), static_cast<Eigen::Index>(free.size()));
  auto column_of = [&](int p) {
    return static_cast<Eigen::Index>(std::lower_bound(free.begin(), free.end(), p) - free.begin());
  };
  const auto slots = layout.slots(item);
  for (std::size_t t = 0; t < slots.size(); ++t) {
    const auto& slot = slots[t];
    if (slot.scaled) {
      const double sd = std::sqrt(x[layout.variance_index()]);
      grad.col(column_of(layout.variance_index())) +=
          natural.col(static_cast<Eigen::Index>(t)) * (slot.base / (2.0 * sd));
    } else if (slot.index >= 0) {
      grad.col(column_of(slot.index)) += natural.col(static_cast<Eigen::Index>(t));
    }
  }
  return grad;
}

}  // namespace irtvuong
