#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include <irtvuong/errors.hpp>
#include <irtvuong/quadform.hpp>
#include <irtvuong/simgen.hpp>

namespace irtvuong::cli {

namespace {

std::string fmt(double v, const char* spec = "%.6g") {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << content;
  if (!f) throw InputError("failed writing '" + path + "'");
}

CsvLoadResult load_data(const DataOptions& d) {
  CsvOptions opts;
  opts.header = d.header;
  opts.na_codes = d.na_codes;
  return load_csv(d.path, opts);
}

json data_config(const DataOptions& d, const CsvLoadResult& loaded) {
  return {{"path", d.path},
          {"header", d.header},
          {"na_codes", d.na_codes},
          {"n_persons", loaded.data.n_persons()},
          {"n_items", loaded.data.n_items()},
          {"categories", loaded.data.categories()},
          {"dropped_rows", loaded.dropped_rows},
          {"fingerprint", loaded.data.fingerprint()}};
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

std::string render_fit(const FittedModel& fit, const CsvLoadResult& loaded) {
  std::ostringstream out;
  const auto& c = fit.convergence;
  out << "Model " << fit.spec.label << " (" << to_string(fit.spec.family) << ", " << fit.spec.n_dims
      << "d): N = " << fit.n_persons << ", J = " << fit.spec.n_items() << ", quadrature "
      << fit.quad_points << " points per dimension\n";
  if (loaded.dropped_rows) out << "Rows dropped for missing values: " << loaded.dropped_rows << "\n";
  out << "Converged: " << yes_no(c.converged) << " (" << c.cycles << " cycles, max |change| "
      << fmt(c.max_param_change, "%.3g") << ", max |score sum| " << fmt(c.max_abs_gradient, "%.3g") << ")\n";
  out << "Log-likelihood: " << fmt(fit.total_loglik, "%.4f") << "   P = " << fit.n_params
      << "   AIC = " << fmt(aic(fit), "%.4f") << "   BIC = " << fmt(bic(fit, fit.n_persons), "%.4f") << "\n";
  out << "Information condition number: " << fmt(c.info_condition_number, "%.4g")
      << (c.info_singular ? " (singular)" : "") << "\n";
  for (const auto& f : c.boundary_flags) out << "Flag: " << f << "\n";
  const bool have_se = !c.info_singular && fit.observed_info.rows() == fit.n_params;
  const Eigen::MatrixXd cov = have_se ? Eigen::MatrixXd(fit.observed_info.inverse()) : Eigen::MatrixXd();
  out << "\n" << pad("parameter", 16) << pad("estimate", 14) << "se\n";
  for (int p = 0; p < fit.n_params; ++p) {
    out << pad(fit.labels[static_cast<std::size_t>(p)], 16) << pad(fmt(fit.estimates[p], "%.5f"), 14)
        << (have_se ? fmt(std::sqrt(cov(p, p)), "%.5f") : "-") << "\n";
  }
  return out.str();
}

std::string casewise_csv(const FittedModel& fit) {
  std::ostringstream out;
  out << "person,loglik";
  for (const auto& l : fit.labels) out << ",score." << l;
  out << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < fit.casewise_loglik.size(); ++i) {
    out << i + 1;
    std::snprintf(buf, sizeof buf, ",%.17g", fit.casewise_loglik[i]);
    out << buf;
    for (Eigen::Index p = 0; p < fit.casewise_scores.cols(); ++p) {
      std::snprintf(buf, sizeof buf, ",%.17g", fit.casewise_scores(i, p));
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

std::string name_of(char which, const ComparisonReport& r) {
  return std::string(1, which) + " (" + (which == 'A' ? r.a.label : r.b.label) + ")";
}

void narrate(ComparisonReport& r, double alpha, int n_persons) {
  const std::string a = name_of('A', r), b = name_of('B', r);
  const std::string al = fmt(alpha, "%g");
  auto& n = r.narrative;
  if (r.a.aic != r.b.aic)
    n.push_back("AIC prefers " + (r.a.aic < r.b.aic ? a : b) + " (difference " +
                fmt(std::abs(r.a.aic - r.b.aic), "%.3f") + ").");
  else
    n.push_back("AIC does not separate the models.");
  if (r.a.bic != r.b.bic)
    n.push_back("BIC prefers " + (r.a.bic < r.b.bic ? a : b) + " (difference " +
                fmt(std::abs(r.a.bic - r.b.bic), "%.3f") + ").");
  if (!r.vuong) return;
  const VuongResult& v = *r.vuong;
  if (v.degenerate) {
    n.push_back("Casewise log-likelihoods coincide: the models are indistinguishable on these data; neither is preferred.");
    return;
  }
  if (v.distinguishable) {
    n.push_back("Distinguishable at alpha = " + al + " (distinguishability p = " + format_p_value(v.dist_p) + ").");
  } else {
    n.push_back("Not distinguishable at alpha = " + al + " (distinguishability p = " + format_p_value(v.dist_p) +
                "): the data cannot tell the models apart, so no likelihood ratio preference is interpreted.");
  }
  if (r.full_model == ' ') {
    const std::string dir = v.direction == Direction::A ? a : v.direction == Direction::B ? b : "";
    if (!v.distinguishable) {
      if (!dir.empty())
        n.push_back("The non-nested LR test alone would favor " + dir + " (z = " + fmt(v.z, "%.3f") +
                    "), which is not interpretable without distinguishability.");
    } else if (dir.empty()) {
      n.push_back("Non-nested LR test: neither model preferred at alpha = " + al + " (z = " + fmt(v.z, "%.3f") + ").");
    } else {
      const double p = v.direction == Direction::A ? v.p_a_better : v.p_b_better;
      n.push_back("Non-nested LR test: " + dir + " preferred (z = " + fmt(v.z, "%.3f") +
                  ", one-sided p = " + format_p_value(p) + ").");
    }
    return;
  }
  const std::string full = r.full_model == 'A' ? a : b;
  const std::string reduced = r.full_model == 'A' ? b : a;
  if (r.nested) {
    const NestedTestResult& t = *r.nested;
    const bool reject = t.p < alpha;
    const std::string which = t.assume_correct ? "classical chi-square" : "weighted chi-square";
    if (reject)
      n.push_back("Nested LR test (" + which + "): " + full + " preferred over " + reduced + " (p = " +
                  format_p_value(t.p) + ").");
    else
      n.push_back("Nested LR test (" + which + "): " + reduced + " retained (p = " + format_p_value(t.p) + ").");
  }
  if (r.lrt) {
    const bool lrt_reject = r.lrt->p < alpha;
    n.push_back("Traditional LRT (chi-square, df = " + std::to_string(r.lrt->df) + "): " +
                (lrt_reject ? "rejects " : "retains ") + reduced + " (p = " + format_p_value(r.lrt->p) + ").");
    if (r.nested && lrt_reject != (r.nested->p_weighted < alpha))
      n.push_back("The traditional LRT and the weighted nested test disagree; the traditional test assumes the full model is correctly specified.");
  }
  (void)n_persons;
}

json summary_json(const ModelSummary& s) {
  return {{"label", s.label},       {"loglik", s.loglik},
          {"n_params", s.n_params}, {"aic", s.aic},
          {"bic", s.bic},           {"converged", s.converged},
          {"cycles", s.cycles},     {"info_condition_number", std::isfinite(s.condition_number) ? json(s.condition_number) : json(nullptr)},
          {"flags", s.flags}};
}

int report_error(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  if (dynamic_cast<const NumericalError*>(&e)) return kNotConverged;
  return kInputError;
}

SimDesign build_design(const SimulateOptions& o) {
  json doc;
  if (!o.design.empty()) {
    doc = read_json_file(o.design);
    if (!o.preset.empty()) doc["preset"] = o.preset;
  } else if (!o.preset.empty()) {
    doc = {{"preset", o.preset}, {"name", o.preset}};
  } else {
    throw InputError("simulate needs --design or --preset");
  }
  if (o.n_persons) doc["N"] = *o.n_persons;
  if (o.n_items) doc["J"] = *o.n_items;
  if (o.replications) doc["replications"] = *o.replications;
  if (o.seed) doc["seed"] = *o.seed;
  if (o.threads) doc["threads"] = *o.threads;
  if (o.alpha) doc["alpha"] = *o.alpha;
  if (o.quad_points) doc["em"]["quad_points"] = *o.quad_points;
  if (o.max_cycles) doc["em"]["max_cycles"] = *o.max_cycles;
  if (o.tol) doc["em"]["param_tol"] = *o.tol;
  if (!o.generator.empty()) {
    json g;
    try {
      g = json::parse(o.generator);
    } catch (const json::exception& e) {
      throw InputError(std::string("--generator is not valid JSON: ") + e.what());
    }
    if (g.is_string()) g = json{{"type", g}};
    if (!doc.contains("generator")) doc["generator"] = json::object();
    else if (doc["generator"].is_string()) doc["generator"] = json{{"type", doc["generator"]}};
    doc["generator"].merge_patch(g);
  }
  return design_from_json(doc);
}

}  // namespace

EmConfig FitSettings::em() const {
  EmConfig c;
  c.quad_points = quad_points;
  c.max_cycles = max_cycles;
  c.param_tol = tol;
  return c;
}

ModelSummary summarize_fit(const FittedModel& fit) {
  ModelSummary s;
  s.label = fit.spec.label;
  s.loglik = fit.total_loglik;
  s.n_params = fit.n_params;
  s.aic = aic(fit);
  s.bic = bic(fit, std::max(1, fit.n_persons));
  s.converged = fit.convergence.converged;
  s.cycles = fit.convergence.cycles;
  s.condition_number = fit.convergence.info_condition_number;
  s.flags = fit.convergence.boundary_flags;
  return s;
}

ComparisonReport compare_models(const ResponseMatrix& data, const ModelSpec& spec_a, const ModelSpec& spec_b,
                                const CompareSettings& settings) {
  if (!settings.force_nested.empty() && settings.force_nested != "a-in-b" && settings.force_nested != "b-in-a")
    throw InputError("--force-nested must be a-in-b or b-in-a");
  ComparisonReport r;
  const FittedModel fa = fit_em(spec_a, data, settings.em);
  const FittedModel fb = fit_em(spec_b, data, settings.em);
  r.a = summarize_fit(fa);
  r.b = summarize_fit(fb);

  if (settings.force_nested == "a-in-b") {
    r.nesting = nests(spec_a, spec_b);
    r.full_model = 'B';
    r.forced_nesting = true;
  } else if (settings.force_nested == "b-in-a") {
    r.nesting = nests(spec_b, spec_a);
    r.full_model = 'A';
    r.forced_nesting = true;
  } else {
    r.nesting = nests(spec_a, spec_b);
    if (r.nesting.nested) {
      r.full_model = 'B';
    } else {
      NestingVerdict other = nests(spec_b, spec_a);
      if (other.nested) {
        r.nesting = std::move(other);
        r.full_model = 'A';
      }
    }
  }

  if (!fa.convergence.converged || !fb.convergence.converged) {
    std::string who = !fa.convergence.converged && !fb.convergence.converged ? "Neither model"
                      : !fa.convergence.converged                           ? "Model A"
                                                                            : "Model B";
    r.narrative.push_back(who + (who == "Neither model" ? " converged" : " did not converge") +
                          "; Vuong tests were not computed.");
    return r;
  }
  try {
    r.vuong = nonnested_lr_test(fa, fb, data, settings.alpha);
    if (r.full_model != ' ') {
      const FittedModel& full = r.full_model == 'A' ? fa : fb;
      const FittedModel& reduced = r.full_model == 'A' ? fb : fa;
      r.nested = nested_test(full, reduced, data, settings.assume_correct);
      r.lrt = traditional_lrt(full, reduced);
    }
    r.complete = true;
  } catch (const NumericalError& e) {
    r.narrative.push_back(std::string("Vuong tests refused: ") + e.what() + ".");
  }
  narrate(r, settings.alpha, data.n_persons());
  return r;
}

json to_json(const ComparisonReport& r) {
  json doc = {{"config", r.config},
              {"model_a", summary_json(r.a)},
              {"model_b", summary_json(r.b)},
              {"nesting", irtvuong::to_json(r.nesting)},
              {"complete", r.complete},
              {"narrative", r.narrative}};
  doc["nesting"]["path"] = r.full_model == ' ' ? "non-nested" : "nested";
  if (r.full_model != ' ') doc["nesting"]["full_model"] = std::string(1, r.full_model);
  doc["nesting"]["forced"] = r.forced_nesting;
  if (r.vuong) {
    json v = irtvuong::to_json(*r.vuong);
    doc["distinguishability"] = v["distinguishability"];
    if (r.full_model == ' ') doc["nonnested_lr"] = v["nonnested_lr"];
    doc["warnings"] = v["warnings"];
  }
  if (r.nested) doc["nested_lr"] = irtvuong::to_json(*r.nested);
  if (r.lrt) doc["traditional_lrt"] = irtvuong::to_json(*r.lrt);
  return doc;
}

std::string render(const ComparisonReport& r) {
  std::ostringstream out;
  const double alpha = r.config.contains("alpha") ? r.config["alpha"].get<double>() : 0.05;
  out << "Model comparison at alpha = " << fmt(alpha, "%g");
  if (r.config.contains("data")) out << ", N = " << r.config["data"].value("n_persons", 0);
  out << "\n\n";
  out << pad("", 26) << pad("A: " + r.a.label, 22) << "B: " << r.b.label << "\n";
  auto row = [&](const std::string& name, const std::string& va, const std::string& vb) {
    out << "  " << pad(name, 24) << pad(va, 22) << vb << "\n";
  };
  row("log-likelihood", fmt(r.a.loglik, "%.4f"), fmt(r.b.loglik, "%.4f"));
  row("parameters", std::to_string(r.a.n_params), std::to_string(r.b.n_params));
  row("AIC", fmt(r.a.aic, "%.4f"), fmt(r.b.aic, "%.4f"));
  row("BIC", fmt(r.a.bic, "%.4f"), fmt(r.b.bic, "%.4f"));
  row("converged (cycles)", yes_no(r.a.converged) + " (" + std::to_string(r.a.cycles) + ")",
      yes_no(r.b.converged) + " (" + std::to_string(r.b.cycles) + ")");
  row("info condition number", fmt(r.a.condition_number, "%.4g"), fmt(r.b.condition_number, "%.4g"));
  for (const auto& f : r.a.flags) out << "  flag A: " << f << "\n";
  for (const auto& f : r.b.flags) out << "  flag B: " << f << "\n";

  out << "\nNesting: ";
  if (r.full_model == ' ') {
    out << (r.nesting.equivalent ? "equivalent parameterizations" : "not nested");
    if (!r.nesting.reason.empty()) out << " (" << r.nesting.reason << ")";
  } else {
    out << (r.full_model == 'A' ? "B within A" : "A within B");
    if (r.forced_nesting) out << " (declared by --force-nested)";
    if (r.nesting.certificate) out << ", df = " << r.nesting.certificate->df;
  }
  out << "\n";

  if (r.vuong) {
    const VuongResult& v = *r.vuong;
    out << "\nDistinguishability test (weighted chi-square null):\n";
    out << "  omega^2 = " << fmt(v.omega2_hat, "%.6g") << ", N*omega^2 = " << fmt(v.dist_stat, "%.6g")
        << ", p = " << format_p_value(v.dist_p) << "\n";
    if (r.full_model == ' ') {
      out << "Non-nested likelihood ratio test (normal null):\n";
      out << "  LR_AB = " << fmt(v.lr_ab, "%.6g") << ", z = " << fmt(v.z, "%.6g")
          << ", p(A better) = " << format_p_value(v.p_a_better)
          << ", p(B better) = " << format_p_value(v.p_b_better) << ", two-sided p = " << format_p_value(v.p_two_sided)
          << "\n";
    }
  }
  if (r.nested) {
    const NestedTestResult& t = *r.nested;
    out << "Nested likelihood ratio test:\n";
    out << "  LR = " << fmt(t.lr_stat, "%.6g") << ", weighted chi-square p = " << format_p_value(t.p_weighted)
        << ", classical chi-square(" << t.df_classical << ") p = " << format_p_value(t.p_classical) << "\n";
  }
  if (r.lrt) {
    out << "Traditional likelihood ratio test (chi-square):\n";
    out << "  chi^2 = " << fmt(r.lrt->stat, "%.6g") << ", df = " << r.lrt->df << ", p = " << format_p_value(r.lrt->p)
        << "\n";
  }
  out << "\nWorkflow:\n";
  for (const auto& line : r.narrative) out << "  - " << line << "\n";
  if (r.vuong && !r.vuong->warnings.empty()) {
    out << "Warnings:\n";
    for (const auto& w : r.vuong->warnings) out << "  - " << w << "\n";
  }
  return out.str();
}

int cmd_fit(const FitOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const CsvLoadResult loaded = load_data(o.data);
    const ModelSpec spec = load_spec(o.model, loaded.data.shape());
    const FittedModel fit = fit_em(spec, loaded.data, o.fit.em());
    json doc = irtvuong::to_json(fit);
    doc["config"] = {{"data", data_config(o.data, loaded)}, {"em", irtvuong::to_json(o.fit.em())}};
    if (!o.out.empty()) write_file(o.out, doc.dump(2) + "\n");
    if (!o.casewise_out.empty()) write_file(o.casewise_out, casewise_csv(fit));
    if (o.format == "json") out << doc.dump(2) << "\n";
    else out << render_fit(fit, loaded);
    if (!fit.convergence.converged) {
      err << "warning: " << spec.label << " did not converge within " << o.fit.max_cycles << " cycles\n";
      return kNotConverged;
    }
    return kOk;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_compare(const CompareOptions& o, std::ostream& out, std::ostream& err) {
  try {
    if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw InputError("--alpha must lie in (0, 1)");
    const CsvLoadResult loaded = load_data(o.data);
    const ModelSpec a = load_spec(o.model_a, loaded.data.shape());
    const ModelSpec b = load_spec(o.model_b, loaded.data.shape());
    CompareSettings settings;
    settings.alpha = o.alpha;
    settings.assume_correct = o.assume_correct;
    settings.force_nested = o.force_nested;
    settings.em = o.fit.em();
    ComparisonReport report = compare_models(loaded.data, a, b, settings);
    report.config = {{"data", data_config(o.data, loaded)},
                     {"model_a", spec_to_json(a)},
                     {"model_b", spec_to_json(b)},
                     {"alpha", o.alpha},
                     {"assume_correct", o.assume_correct},
                     {"force_nested", o.force_nested},
                     {"em", irtvuong::to_json(settings.em)}};
    const json doc = to_json(report);
    if (!o.out.empty()) write_file(o.out, doc.dump(2) + "\n");
    if (o.format == "json") out << doc.dump(2) << "\n";
    else out << render(report);
    return report.complete ? kOk : kNotConverged;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const SimDesign design = build_design(o);
    const SimReport report = run_design(design);
    const json doc = irtvuong::to_json(report);
    if (!o.out.empty()) write_file(o.out, doc.dump(2) + "\n");
    if (o.format == "json") out << doc.dump(2) << "\n";
    else out << render_table(report);
    return kOk;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_generate(const GenerateOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const SimDesign design = build_design(o.design);
    if (o.rep < 0) throw InputError("--rep must be non-negative");
    const GeneratedData gen = generate(design, o.rep);
    if (o.out.empty()) out << to_csv(gen.data);
    else write_csv(gen.data, o.out);
    return kOk;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vuong tests for item response model comparison"};
  app.require_subcommand(1);

  auto add_data = [](CLI::App* sub, DataOptions& d) {
    sub->add_option("--data", d.path, "response CSV (rows persons, columns items, codes 0..K-1)")->required();
    sub->add_flag("--header", d.header, "first CSV row holds item names");
    sub->add_option("--na", d.na_codes, "missing-value codes (rows with any are dropped)");
  };
  auto add_fit = [](CLI::App* sub, FitSettings& f) {
    sub->add_option("--quad-points", f.quad_points, "quadrature points per dimension (0 = default)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--max-cycles", f.max_cycles, "maximum EM cycles")->check(CLI::PositiveNumber);
    sub->add_option("--tol", f.tol, "parameter-change convergence tolerance")->check(CLI::PositiveNumber);
  };
  auto add_format = [](CLI::App* sub, std::string& format) {
    sub->add_option("--format", format, "stdout rendering")->check(CLI::IsMember({"json", "table"}));
  };

  FitOptions fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one model by marginal maximum likelihood");
  add_data(fit_cmd, fit.data);
  fit_cmd->add_option("--model", fit.model, "family name, inline JSON spec or spec file")->required();
  add_fit(fit_cmd, fit.fit);
  fit_cmd->add_option("--out", fit.out, "write the fitted model as JSON");
  fit_cmd->add_option("--casewise", fit.casewise_out, "write casewise logliks and scores as CSV");
  add_format(fit_cmd, fit.format);

  CompareOptions cmp;
  CLI::App* cmp_cmd = app.add_subcommand("compare", "fit two models and run the Vuong test workflow");
  add_data(cmp_cmd, cmp.data);
  cmp_cmd->add_option("--model-a", cmp.model_a, "model A: family name, inline JSON spec or spec file")->required();
  cmp_cmd->add_option("--model-b", cmp.model_b, "model B: family name, inline JSON spec or spec file")->required();
  cmp_cmd->add_option("--alpha", cmp.alpha, "test level");
  cmp_cmd->add_flag("--assume-correct", cmp.assume_correct,
                    "nested test: use the classical chi-square null (full model correctly specified)");
  cmp_cmd->add_option("--force-nested", cmp.force_nested, "declare the pair nested when it cannot be verified")
      ->check(CLI::IsMember({"a-in-b", "b-in-a"}));
  add_fit(cmp_cmd, cmp.fit);
  cmp_cmd->add_option("--out", cmp.out, "write the comparison report as JSON");
  add_format(cmp_cmd, cmp.format);

  auto add_design = [](CLI::App* sub, SimulateOptions& s) {
    sub->add_option("--design", s.design, "design JSON file");
    sub->add_option("--preset", s.preset, "ready-made design")->check(CLI::IsMember(preset_names()));
    sub->add_option("-N,--persons", s.n_persons, "persons per replication")->check(CLI::PositiveNumber);
    sub->add_option("-J,--items", s.n_items, "items")->check(CLI::PositiveNumber);
    sub->add_option("-R,--replications", s.replications, "replications")->check(CLI::PositiveNumber);
    sub->add_option("--seed", s.seed, "master seed");
    sub->add_option("--generator", s.generator, "generator override, e.g. '{\"type\":\"HYBRID\",\"D\":5}'");
  };

  SimulateOptions sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run a Monte Carlo design");
  add_design(sim_cmd, sim);
  sim_cmd->add_option("--threads", sim.threads, "worker threads")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--alpha", sim.alpha, "test level");
  sim_cmd->add_option("--quad-points", sim.quad_points, "quadrature points per dimension")
      ->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--max-cycles", sim.max_cycles, "maximum EM cycles")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--tol", sim.tol, "parameter-change convergence tolerance")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--out", sim.out, "write the report as JSON");
  add_format(sim_cmd, sim.format);

  GenerateOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("generate", "write one simulated dataset as CSV");
  add_design(gen_cmd, gen.design);
  gen_cmd->add_option("--rep", gen.rep, "replication index")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--out", gen.out, "CSV path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }
  if (fit_cmd->parsed()) return cmd_fit(fit, out, err);
  if (cmp_cmd->parsed()) return cmd_compare(cmp, out, err);
  if (sim_cmd->parsed()) return cmd_simulate(sim, out, err);
  return cmd_generate(gen, out, err);
}

}  // namespace irtvuong::cli
