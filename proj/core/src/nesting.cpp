#include "irtvuong/nesting.hpp"

#include <cmath>
#include <sstream>

#include "irtvuong/errors.hpp"

namespace irtvuong {

namespace {

bool links_compatible(Link a, Link b, int K) {
  if (a == b) return true;
  const bool logistic_a = a == Link::Graded || a == Link::PartialCredit;
  const bool logistic_b = b == Link::Graded || b == Link::PartialCredit;
  return K == 2 && logistic_a && logistic_b;
}

ParamSource source_of(const NaturalSlot& slot, int variance_index) {
  if (slot.scaled) return {ParamSource::Kind::ScaledSd, slot.base, variance_index};
  if (slot.index >= 0) return {ParamSource::Kind::Reduced, 0.0, slot.index};
  return {ParamSource::Kind::Constant, slot.base, -1};
}

std::string describe(const ParamSource& s, const std::vector<std::string>& reduced_labels) {
  std::ostringstream out;
  switch (s.kind) {
    case ParamSource::Kind::Constant: out << s.value; break;
    case ParamSource::Kind::Reduced: out << "reduced." << reduced_labels[static_cast<std::size_t>(s.index)]; break;
    case ParamSource::Kind::ScaledSd: out << s.value << " * sqrt(reduced.latent.var)"; break;
  }
  return out.str();
}

NestingVerdict decline(std::string reason) {
  NestingVerdict v;
  v.reason = std::move(reason);
  return v;
}

}  // namespace

ParameterVector NestingCertificate::apply(const ParameterVector& reduced) const {
  ParameterVector full(static_cast<Eigen::Index>(map.size()));
  for (std::size_t p = 0; p < map.size(); ++p) {
    const auto& s = map[p];
    switch (s.kind) {
      case ParamSource::Kind::Constant: full[static_cast<Eigen::Index>(p)] = s.value; break;
      case ParamSource::Kind::Reduced: full[static_cast<Eigen::Index>(p)] = reduced[s.index]; break;
      case ParamSource::Kind::ScaledSd:
        full[static_cast<Eigen::Index>(p)] = s.value * std::sqrt(reduced[s.index]);
        break;
    }
  }
  return full;
}

NestingVerdict nests(const ModelSpec& reduced, const ModelSpec& full) {
  if (reduced.categories != full.categories)
    throw InputError("nesting check needs specs over the same data shape");
  const ParameterLayout lr(reduced);
  const ParameterLayout lf(full);
  const int J = reduced.n_items();
  const int Mr = reduced.n_dims, Mf = full.n_dims;
  if (Mr > Mf) return decline("reduced model has more dimensions than the full model");

  const Eigen::MatrixXd cov_r = reduced.prior_covariance();
  const Eigen::MatrixXd cov_f = full.prior_covariance().topLeftCorner(Mr, Mr);
  if (!cov_r.isApprox(cov_f, 1e-12) && (cov_r - cov_f).cwiseAbs().maxCoeff() > 1e-12)
    return decline("latent covariance structures differ");

  std::vector<std::optional<ParamSource>> map(static_cast<std::size_t>(lf.size()));
  auto assign = [&](int full_index, const ParamSource& src) {
    auto& slot = map[static_cast<std::size_t>(full_index)];
    if (!slot) {
      slot = src;
      return true;
    }
    return *slot == src;
  };

  for (int j = 0; j < J; ++j) {
    const int K = reduced.categories[static_cast<std::size_t>(j)];
    if (!links_compatible(lr.link(j), lf.link(j), K))
      return decline("item " + std::to_string(j + 1) + " uses a different link function");
    const auto sr = lr.slots(j);
    const auto sf = lf.slots(j);
    for (int m = 0; m < Mf; ++m) {
      const NaturalSlot& f = sf[static_cast<std::size_t>(m)];
      ParamSource src{ParamSource::Kind::Constant, 0.0, -1};
      if (m < Mr) src = source_of(sr[static_cast<std::size_t>(m)], lr.variance_index());
      if (f.scaled) {
        // Full model carries a free variance: slope = base * sd_full.
        ParamSource var_src;
        if (src.kind == ParamSource::Kind::ScaledSd && src.value == f.base) {
          var_src = {ParamSource::Kind::Reduced, 0.0, lr.variance_index()};
        } else if (src.kind == ParamSource::Kind::Constant && src.value == f.base) {
          var_src = {ParamSource::Kind::Constant, 1.0, -1};
        } else {
          return decline("item " + std::to_string(j + 1) + " slope cannot be matched to the full model's variance-scaled slope");
        }
        if (!assign(lf.variance_index(), var_src))
          return decline("latent variance cannot be mapped consistently");
      } else if (f.index >= 0) {
        if (!assign(f.index, src))
          return decline("equality class of item " + std::to_string(j + 1) + " slope " +
                         std::to_string(m + 1) + " is not respected by the reduced model");
      } else {
        if (!(src.kind == ParamSource::Kind::Constant && src.value == f.base))
          return decline("item " + std::to_string(j + 1) + " slope " + std::to_string(m + 1) +
                         " is fixed in the full model but not to the reduced value");
      }
    }
    for (std::size_t t = static_cast<std::size_t>(Mf); t < sf.size(); ++t) {
      const NaturalSlot& f = sf[t];
      const ParamSource src = source_of(sr[t - static_cast<std::size_t>(Mf) + static_cast<std::size_t>(Mr)], lr.variance_index());
      if (!assign(f.index, src)) return decline("intercepts cannot be mapped");
    }
  }

  NestingCertificate cert;
  cert.df = lf.size() - lr.size();
  for (int p = 0; p < lf.size(); ++p) {
    const auto& s = map[static_cast<std::size_t>(p)];
    if (!s) return decline("full parameter " + lf.labels()[static_cast<std::size_t>(p)] + " is not determined");
    cert.map.push_back(*s);
    const bool identity = s->kind == ParamSource::Kind::Reduced &&
                          lr.labels()[static_cast<std::size_t>(s->index)] == lf.labels()[static_cast<std::size_t>(p)];
    if (!identity)
      cert.constraints.push_back(lf.labels()[static_cast<std::size_t>(p)] + " = " + describe(*s, lr.labels()));
  }
  if (cert.df < 0) return decline("reduced model has more free parameters than the full model");

  NestingVerdict v;
  v.nested = cert.df > 0;
  v.equivalent = cert.df == 0;
  if (v.equivalent) v.reason = "models are reparameterizations of each other (df = 0)";
  v.certificate = std::move(cert);
  return v;
}

}  // namespace irtvuong
