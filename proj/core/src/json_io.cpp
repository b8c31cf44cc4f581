#include "irtvuong/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "irtvuong/errors.hpp"
#include "irtvuong/quadform.hpp"

namespace irtvuong {

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// NaN and infinities have no JSON form; they are written as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

Eigen::MatrixXd matrix_from_json(const json& doc) {
  if (!doc.is_array() || doc.empty()) throw InputError("expected a non-empty matrix");
  const auto n = static_cast<Eigen::Index>(doc.size());
  const auto m = static_cast<Eigen::Index>(doc[0].size());
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(doc[static_cast<std::size_t>(i)].size()) != m)
      throw InputError("ragged matrix");
    for (Eigen::Index j = 0; j < m; ++j)
      out(i, j) = doc[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
  }
  return out;
}

std::vector<int> item_list(const json& items, int J) {
  std::vector<int> out;
  if (items.is_string()) {
    if (items.get<std::string>() != "all") throw InputError("slope items must be a list or \"all\"");
    for (int j = 0; j < J; ++j) out.push_back(j);
    return out;
  }
  if (!items.is_array()) throw InputError("slope items must be a list or \"all\"");
  for (const auto& i : items) {
    const int j = i.get<int>();
    if (j < 1 || j > J) throw InputError("slope item " + std::to_string(j) + " out of range 1.." + std::to_string(J));
    out.push_back(j - 1);
  }
  return out;
}

SlopeConstraint constraint_from_json(const json& entry) {
  if (entry.contains("fixed")) return SlopeConstraint::fixed(entry.at("fixed").get<double>());
  if (entry.contains("equal")) return SlopeConstraint::equal(entry.at("equal").get<int>());
  if (entry.contains("free")) return SlopeConstraint::free();
  throw InputError("slope entry needs one of fixed, equal, free");
}

json constraint_to_json(const SlopeConstraint& c) {
  switch (c.kind) {
    case SlopeConstraint::Kind::Fixed: return {{"fixed", c.value}};
    case SlopeConstraint::Kind::Equal: return {{"equal", c.eq_class}};
    case SlopeConstraint::Kind::Free: return {{"free", true}};
  }
  return {};
}

template <class T>
void read_if(const json& doc, const char* key, T& target) {
  if (doc.contains(key)) target = doc.at(key).get<T>();
}

}  // namespace

ModelSpec spec_from_json(const json& doc, const DataShape& shape) {
  try {
    if (doc.is_string()) {
      ModelSpec spec = make_spec(family_from_string(doc.get<std::string>()), shape);
      spec.validate();
      return spec;
    }
    if (!doc.is_object()) throw InputError("model spec must be a family name or an object");
    if (doc.contains("categories") && doc.at("categories").get<std::vector<int>>() != shape.categories)
      throw InputError("model spec categories do not match the data");
    const Family family = family_from_string(doc.at("family").get<std::string>());
    const int n_dims = doc.value("n_dims", 1);
    const double guessing = doc.value("guessing", 0.0);
    ModelSpec spec = make_spec(family, shape, n_dims, guessing);
    if (doc.contains("latent")) {
      const json& lat = doc.at("latent");
      const std::string type = lat.is_string() ? lat.get<std::string>() : lat.at("type").get<std::string>();
      if (type == "identity") {
        spec.latent = LatentStructure::Identity;
      } else if (type == "free_variance") {
        spec.latent = LatentStructure::FreeVariance;
      } else if (type == "correlation") {
        spec.latent = LatentStructure::FixedCorrelation;
        spec.correlation = matrix_from_json(lat.at("matrix"));
      } else {
        throw InputError("unknown latent type '" + type + "'");
      }
    }
    if (doc.contains("slopes")) {
      for (const auto& entry : doc.at("slopes")) {
        const std::vector<int> items = item_list(entry.at("items"), spec.n_items());
        const int dim = entry.value("dim", 1);
        if (dim < 1 || dim > spec.n_dims) throw InputError("slope dim out of range");
        set_slope(spec, items, dim - 1, constraint_from_json(entry));
      }
    }
    read_if(doc, "label", spec.label);
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model spec: ") + e.what());
  }
}

ModelSpec spec_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("categories"))
    throw InputError("model spec needs `categories` when no data shape is given");
  return spec_from_json(doc, DataShape{doc.at("categories").get<std::vector<int>>()});
}

json spec_to_json(const ModelSpec& spec) {
  json doc;
  doc["family"] = to_string(spec.family);
  doc["n_dims"] = spec.n_dims;
  doc["categories"] = spec.categories;
  doc["label"] = spec.label;
  if (spec.family == Family::ThreePLFixedG) doc["guessing"] = spec.guessing;
  switch (spec.latent) {
    case LatentStructure::Identity: doc["latent"] = "identity"; break;
    case LatentStructure::FreeVariance: doc["latent"] = "free_variance"; break;
    case LatentStructure::FixedCorrelation:
      doc["latent"] = {{"type", "correlation"}, {"matrix", matrix_to_json(spec.correlation)}};
      break;
  }
  // Items with the same constraint in a dimension are grouped.
  json slopes = json::array();
  for (int m = 0; m < spec.n_dims; ++m) {
    std::vector<std::pair<SlopeConstraint, std::vector<int>>> groups;
    for (int j = 0; j < spec.n_items(); ++j) {
      const auto& c = spec.slopes[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)];
      auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == c; });
      if (it == groups.end()) groups.push_back({c, {j + 1}});
      else it->second.push_back(j + 1);
    }
    for (const auto& [c, items] : groups) {
      json entry = constraint_to_json(c);
      entry["items"] = items;
      entry["dim"] = m + 1;
      slopes.push_back(std::move(entry));
    }
  }
  doc["slopes"] = std::move(slopes);
  return doc;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

ModelSpec load_spec(const std::string& arg, const DataShape& shape) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(arg, ec)) return spec_from_json(read_json_file(arg), shape);
  const auto first = arg.find_first_not_of(" \t\n");
  if (first != std::string::npos && (arg[first] == '{' || arg[first] == '"')) {
    json doc;
    try {
      doc = json::parse(arg);
    } catch (const json::exception& e) {
      throw InputError(std::string("inline model spec is not valid JSON: ") + e.what());
    }
    return spec_from_json(doc, shape);
  }
  return spec_from_json(json(arg), shape);
}

json to_json(const EmConfig& c) {
  return {{"max_cycles", c.max_cycles},         {"param_tol", c.param_tol},
          {"quad_points", c.quad_points},       {"grad_tol_factor", c.grad_tol_factor},
          {"accelerate", c.accelerate},         {"max_newton", c.max_newton},
          {"compute_information", c.compute_information}, {"polish_after", c.polish_after},
          {"divergence_bound", c.divergence_bound}};
}

EmConfig em_config_from_json(const json& doc, EmConfig c) {
  read_if(doc, "max_cycles", c.max_cycles);
  read_if(doc, "param_tol", c.param_tol);
  read_if(doc, "quad_points", c.quad_points);
  read_if(doc, "grad_tol_factor", c.grad_tol_factor);
  read_if(doc, "accelerate", c.accelerate);
  read_if(doc, "max_newton", c.max_newton);
  read_if(doc, "compute_information", c.compute_information);
  read_if(doc, "polish_after", c.polish_after);
  read_if(doc, "divergence_bound", c.divergence_bound);
  return c;
}

json to_json(const FittedModel& fit) {
  json params = json::array();
  for (Eigen::Index p = 0; p < fit.estimates.size(); ++p) {
    const double se =
        fit.observed_info.rows() == fit.estimates.size() && !fit.convergence.info_singular
            ? std::sqrt(fit.observed_info.inverse()(p, p))
            : std::nan("");
    params.push_back({{"label", fit.labels[static_cast<std::size_t>(p)]},
                      {"estimate", fit.estimates[p]},
                      {"se", number(se)}});
  }
  const auto& c = fit.convergence;
  return {{"spec", spec_to_json(fit.spec)},
          {"loglik", fit.total_loglik},
          {"n_params", fit.n_params},
          {"n_persons", fit.n_persons},
          {"aic", aic(fit)},
          {"bic", bic(fit, std::max(fit.n_persons, 1))},
          {"quad_points", fit.quad_points},
          {"data_fingerprint", fit.data_fingerprint},
          {"parameters", params},
          {"convergence",
           {{"converged", c.converged},
            {"cycles", c.cycles},
            {"max_param_change", c.max_param_change},
            {"max_abs_gradient", c.max_abs_gradient},
            {"info_condition_number", number(c.info_condition_number)},
            {"info_singular", c.info_singular},
            {"newton_steps", c.newton_steps},
            {"diverged", c.diverged},
            {"boundary_flags", c.boundary_flags}}}};
}

json to_json(const NestingVerdict& v) {
  json doc = {{"nested", v.nested}, {"equivalent", v.equivalent}};
  if (!v.reason.empty()) doc["reason"] = v.reason;
  if (v.certificate) {
    doc["df"] = v.certificate->df;
    doc["constraints"] = v.certificate->constraints;
  }
  return doc;
}

json to_json(const DistinguishabilityResult& r) {
  return {{"test", "Vuong distinguishability (weighted chi-square)"},
          {"omega2_hat", r.omega2_hat},
          {"stat", r.stat},
          {"p", r.p},
          {"p_display", format_p_value(r.p)},
          {"weights", r.weights},
          {"identical", r.identical},
          {"warnings", r.warnings}};
}

json to_json(const VuongResult& r) {
  return {{"distinguishability",
           {{"test", "Vuong distinguishability (weighted chi-square)"},
            {"omega2_hat", r.omega2_hat},
            {"stat", r.dist_stat},
            {"p", r.dist_p},
            {"p_display", format_p_value(r.dist_p)},
            {"weights", r.dist_weights},
            {"significant", r.distinguishable}}},
          {"nonnested_lr",
           {{"test", "Vuong non-nested likelihood ratio (normal)"},
            {"lr_ab", r.lr_ab},
            {"z", r.z},
            {"p_two_sided", r.p_two_sided},
            {"p_a_better", r.p_a_better},
            {"p_b_better", r.p_b_better},
            {"direction", to_string(r.direction)},
            {"valid", r.valid},
            {"degenerate", r.degenerate}}},
          {"alpha", r.alpha},
          {"warnings", r.warnings}};
}

json to_json(const NestedTestResult& r) {
  return {{"test", "Vuong nested likelihood ratio (weighted chi-square)"},
          {"lr_stat", r.lr_stat},
          {"weights", r.weights},
          {"p_weighted", r.p_weighted},
          {"p_classical", r.p_classical},
          {"df_classical", r.df_classical},
          {"assume_correct", r.assume_correct},
          {"p", r.p},
          {"p_display", format_p_value(r.p)},
          {"warnings", r.warnings}};
}

json to_json(const LrtResult& r) {
  return {{"test", "traditional likelihood ratio (chi-square)"},
          {"stat", r.stat},
          {"df", r.df},
          {"p", r.p},
          {"p_display", format_p_value(r.p)}};
}

json to_json(const GeneratorSpec& g) {
  json doc = {{"type", to_string(g.type)}};
  switch (g.type) {
    case Generator::Grm:
    case Generator::Gpcm: doc["categories"] = g.categories; break;
    case Generator::Hybrid:
      doc["categories"] = g.categories;
      doc["D"] = g.hybrid_d;
      break;
    case Generator::ThreePlFixedG: doc["guessing"] = g.guessing; break;
    case Generator::MdTwoPl: doc["rho"] = g.rho; break;
    case Generator::Binomial:
      doc["n"] = g.binom_n;
      doc["p"] = g.binom_p;
      break;
    default: break;
  }
  return doc;
}

GeneratorSpec generator_from_json(const json& doc, GeneratorSpec g) {
  if (doc.is_string()) {
    g.type = generator_from_string(doc.get<std::string>());
    return g;
  }
  if (doc.contains("type")) g.type = generator_from_string(doc.at("type").get<std::string>());
  read_if(doc, "categories", g.categories);
  read_if(doc, "D", g.hybrid_d);
  read_if(doc, "guessing", g.guessing);
  read_if(doc, "rho", g.rho);
  read_if(doc, "n", g.binom_n);
  read_if(doc, "p", g.binom_p);
  return g;
}

json to_json(const SimDesign& d) {
  return {{"name", d.name},
          {"generator", to_json(d.generator)},
          {"N", d.n_persons},
          {"J", d.n_items},
          {"replications", d.replications},
          {"seed", d.seed},
          {"threads", d.threads},
          {"alpha", d.recipe.alpha},
          {"model_a", spec_to_json(d.recipe.model_a)},
          {"model_b", spec_to_json(d.recipe.model_b)},
          {"em", to_json(d.recipe.em)}};
}

SimDesign design_from_json(const json& doc) {
  try {
    if (!doc.is_object()) throw InputError("design must be a JSON object");
    const int N = doc.value("N", 500);
    const int J = doc.value("J", 10);
    const int R = doc.value("replications", 200);
    const std::uint64_t seed = doc.value("seed", std::uint64_t{1});
    SimDesign d;
    if (doc.contains("preset")) {
      d = preset_design(doc.at("preset").get<std::string>(), N, J, R, seed);
    } else {
      d.n_persons = N;
      d.n_items = J;
      d.replications = R;
      d.seed = seed;
      if (!doc.contains("model_a") || !doc.contains("model_b"))
        throw InputError("design without a preset needs model_a and model_b");
    }
    read_if(doc, "name", d.name);
    if (doc.contains("generator")) d.generator = generator_from_json(doc.at("generator"), d.generator);
    read_if(doc, "threads", d.threads);
    read_if(doc, "alpha", d.recipe.alpha);
    if (doc.contains("em")) d.recipe.em = em_config_from_json(doc.at("em"), d.recipe.em);
    const DataShape shape = d.shape();
    // Preset models follow a changed shape (e.g. a different category count).
    if (doc.contains("model_a")) d.recipe.model_a = spec_from_json(doc.at("model_a"), shape);
    if (doc.contains("model_b")) d.recipe.model_b = spec_from_json(doc.at("model_b"), shape);
    if (d.name.empty()) d.name = "design";
    d.validate();
    return d;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed design: ") + e.what());
  } catch (const SpecError& e) {
    throw InputError(std::string("invalid design model: ") + e.what());
  }
}

json to_json(const RepRecord& r) {
  json doc = {{"rep", r.rep},
              {"converged_a", r.converged_a},
              {"converged_b", r.converged_b},
              {"usable", r.usable},
              {"cycles_a", r.cycles_a},
              {"cycles_b", r.cycles_b},
              {"loglik_a", r.loglik_a},
              {"loglik_b", r.loglik_b},
              {"params_a", r.params_a},
              {"params_b", r.params_b},
              {"aic_a", r.aic_a},
              {"aic_b", r.aic_b},
              {"bic_a", r.bic_a},
              {"bic_b", r.bic_b},
              {"omega2_hat", r.omega2_hat},
              {"dist_stat", r.dist_stat},
              {"dist_p", r.dist_p},
              {"lr_ab", r.lr_ab},
              {"z", r.z},
              {"p_a_better", r.p_a_better},
              {"p_b_better", r.p_b_better},
              {"direction", to_string(r.direction)},
              {"valid", r.valid},
              {"nested_lr", r.nested_lr},
              {"p_weighted", r.p_weighted},
              {"p_classical", r.p_classical},
              {"lrt_stat", r.lrt_stat},
              {"lrt_p", r.lrt_p},
              {"lrt_df", r.lrt_df}};
  if (!r.note.empty()) doc["note"] = r.note;
  return doc;
}

json to_json(const SimRates& s) {
  return {{"n_converged", s.n_converged},
          {"convergence_rate", s.convergence_rate},
          {"dist_reject", number(s.dist_reject)},
          {"lrv_a_all", number(s.lrv_a_all)},
          {"lrv_b_all", number(s.lrv_b_all)},
          {"lrv_a_valid", number(s.lrv_a_valid)},
          {"lrv_b_valid", number(s.lrv_b_valid)},
          {"lrv_a_given_dist", number(s.lrv_a_given_dist)},
          {"lrv_b_given_dist", number(s.lrv_b_given_dist)},
          {"aic_a", number(s.aic_a)},
          {"aic_b", number(s.aic_b)},
          {"bic_a", number(s.bic_a)},
          {"bic_b", number(s.bic_b)},
          {"mean_abs_aic_diff", number(s.mean_abs_aic_diff)},
          {"nested_weighted_reject", number(s.nested_weighted_reject)},
          {"nested_classical_reject", number(s.nested_classical_reject)},
          {"lrt_reject", number(s.lrt_reject)}};
}

json to_json(const SimReport& r) {
  json records = json::array();
  for (const auto& rec : r.records) records.push_back(to_json(rec));
  json doc = {{"design", to_json(r.design)},
              {"nested", r.nested},
              {"label_a", r.label_a},
              {"label_b", r.label_b},
              {"rates", to_json(r.rates)},
              {"records", std::move(records)}};
  if (r.nested) doc["full_model"] = std::string(1, r.full_model);
  return doc;
}

}  // namespace irtvuong
