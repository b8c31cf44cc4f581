#include "irtvuong/simgen.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "irtvuong/errors.hpp"
#include "irtvuong/nesting.hpp"

namespace irtvuong {

namespace {

constexpr double kLogSlopeSd = 0.25;

std::mt19937_64 replication_stream(std::uint64_t seed, int rep) {
  const auto r = static_cast<std::uint64_t>(rep);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r >> 32),
                    0x6a09e667u};
  return std::mt19937_64(seq);
}

// Polytomous intercept pattern: (1, 0, -1) for K = 4, evenly spaced from 1
// to -1 otherwise.
double base_intercept(int k, int K) {
  if (K <= 2) return 0.0;
  return 1.0 - 2.0 * k / (K - 2);
}

struct NestingRole {
  bool nested = false;
  char full = ' ';
};

NestingRole nesting_role(const Recipe& recipe) {
  NestingRole role;
  if (nests(recipe.model_a, recipe.model_b).nested) {
    role = {true, 'B'};
  } else if (nests(recipe.model_b, recipe.model_a).nested) {
    role = {true, 'A'};
  }
  return role;
}

double mean_of(const std::vector<const RepRecord*>& recs, auto pred) {
  if (recs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double hits = 0.0;
  for (const RepRecord* r : recs)
    if (pred(*r)) hits += 1.0;
  return hits / static_cast<double>(recs.size());
}

std::string rate(double v) {
  if (std::isnan(v)) return "  -  ";
  std::ostringstream out;
  out << std::fixed << std::setprecision(3) << v;
  return out.str();
}

}  // namespace

std::string to_string(Generator g) {
  switch (g) {
    case Generator::Rm: return "RM";
    case Generator::TwoPl: return "TWO_PL";
    case Generator::ThreePlFixedG: return "THREE_PL_FIXED_G";
    case Generator::Grm: return "GRM";
    case Generator::Gpcm: return "GPCM";
    case Generator::Hybrid: return "HYBRID";
    case Generator::MdTwoPl: return "MD_TWO_PL";
    case Generator::Binomial: return "BINOMIAL";
  }
  return "?";
}

Generator generator_from_string(const std::string& name) {
  for (Generator g : {Generator::Rm, Generator::TwoPl, Generator::ThreePlFixedG, Generator::Grm,
                      Generator::Gpcm, Generator::Hybrid, Generator::MdTwoPl, Generator::Binomial})
    if (to_string(g) == name) return g;
  if (name == "2PL") return Generator::TwoPl;
  if (name == "RASCH") return Generator::Rm;
  if (name == "MD2PL") return Generator::MdTwoPl;
  if (name == "3PL_FIXED_G") return Generator::ThreePlFixedG;
  throw InputError("unknown generator '" + name + "'");
}

DataShape SimDesign::shape() const {
  int K = 2;
  switch (generator.type) {
    case Generator::Grm:
    case Generator::Gpcm:
    case Generator::Hybrid: K = generator.categories; break;
    case Generator::Binomial: K = generator.binom_n + 1; break;
    default: break;
  }
  return DataShape{std::vector<int>(static_cast<std::size_t>(std::max(n_items, 0)), K)};
}

void SimDesign::validate() const {
  if (n_persons < 1) throw InputError("design needs N >= 1");
  if (n_items < 1) throw InputError("design needs J >= 1");
  if (replications < 1) throw InputError("design needs at least one replication");
  if (threads < 1) throw InputError("threads must be positive");
  const auto& g = generator;
  if (g.type == Generator::Hybrid && (g.hybrid_d < 0 || g.hybrid_d > n_items))
    throw InputError("HYBRID requires 0 <= D <= J");
  if (g.type == Generator::Binomial && (g.binom_n < 1 || g.binom_n > 63 || !(g.binom_p > 0.0 && g.binom_p < 1.0)))
    throw InputError("BINOMIAL requires n >= 1 and 0 < p < 1");
  if (g.type == Generator::MdTwoPl && !(std::abs(g.rho) < 1.0))
    throw InputError("MD_TWO_PL requires |rho| < 1");
  if (g.type == Generator::ThreePlFixedG && !(g.guessing >= 0.0 && g.guessing < 1.0))
    throw InputError("THREE_PL_FIXED_G requires 0 <= g < 1");
  if ((g.type == Generator::Grm || g.type == Generator::Gpcm || g.type == Generator::Hybrid) &&
      (g.categories < 2 || g.categories > 64))
    throw InputError("polytomous generators need 2..64 categories");
  if (!(recipe.alpha > 0.0 && recipe.alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  const DataShape s = shape();
  if (recipe.model_a.categories != s.categories || recipe.model_b.categories != s.categories)
    throw InputError("recipe models do not match the design's data shape");
  recipe.model_a.validate_fittable();
  recipe.model_b.validate_fittable();
}

GeneratedData generate(const SimDesign& design, int rep) {
  design.validate();
  const auto& g = design.generator;
  const int N = design.n_persons, J = design.n_items;
  auto rng = replication_stream(design.seed, rep);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto log_normal_slope = [&] { return std::exp(kLogSlopeSd * normal(rng)); };

  GeneratedData out;
  const DataShape shape = design.shape();
  std::vector<int> cells(static_cast<std::size_t>(N) * J);

  if (g.type == Generator::Binomial) {
    std::binomial_distribution<int> binom(g.binom_n, g.binom_p);
    for (auto& c : cells) c = binom(rng);
    out.families.assign(static_cast<std::size_t>(J), "BINOMIAL");
    out.data = ResponseMatrix(N, shape.categories, std::move(cells));
    return out;
  }

  const int M = g.type == Generator::MdTwoPl ? 2 : 1;
  out.items.resize(static_cast<std::size_t>(J));
  for (auto& it : out.items) {
    it.slopes = Eigen::VectorXd::Ones(M);
    it.link = Link::Graded;
  }
  switch (g.type) {
    case Generator::Rm:
      for (auto& it : out.items) it.intercepts = Eigen::VectorXd::Constant(1, normal(rng));
      out.families.assign(static_cast<std::size_t>(J), "RM");
      break;
    case Generator::TwoPl:
      for (auto& it : out.items) it.slopes[0] = log_normal_slope();
      for (auto& it : out.items) it.intercepts = Eigen::VectorXd::Constant(1, normal(rng));
      out.families.assign(static_cast<std::size_t>(J), "2PL");
      break;
    case Generator::ThreePlFixedG:
      for (auto& it : out.items) {
        it.intercepts = Eigen::VectorXd::Constant(1, normal(rng));
        it.link = Link::Guessing;
        it.guessing = g.guessing;
      }
      out.families.assign(static_cast<std::size_t>(J), "3PL");
      break;
    case Generator::Grm:
    case Generator::Gpcm:
    case Generator::Hybrid: {
      const int K = g.categories;
      for (auto& it : out.items) it.slopes[0] = log_normal_slope();
      for (int j = 0; j < J; ++j) {
        auto& it = out.items[static_cast<std::size_t>(j)];
        const double shift = normal(rng);
        it.intercepts.resize(K - 1);
        for (int k = 0; k < K - 1; ++k) it.intercepts[k] = base_intercept(k, K) + shift;
        const bool gpcm = g.type == Generator::Gpcm || (g.type == Generator::Hybrid && j < g.hybrid_d);
        it.link = gpcm ? Link::PartialCredit : Link::Graded;
        out.families.push_back(gpcm ? "GPCM" : "GRM");
      }
      break;
    }
    case Generator::MdTwoPl:
      for (auto& it : out.items) it.slopes[0] = log_normal_slope();
      for (auto& it : out.items) it.slopes[1] = log_normal_slope();
      for (auto& it : out.items) it.intercepts = Eigen::VectorXd::Constant(1, normal(rng));
      out.families.assign(static_cast<std::size_t>(J), "MD2PL");
      break;
    case Generator::Binomial: break;
  }

  out.theta.resize(N, M);
  const double rho = g.rho;
  for (int i = 0; i < N; ++i) {
    const double z1 = normal(rng);
    out.theta(i, 0) = z1;
    if (M == 2) out.theta(i, 1) = rho * z1 + std::sqrt(1.0 - rho * rho) * normal(rng);
  }

  double prob[64];
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < J; ++j) {
      const auto& it = out.items[static_cast<std::size_t>(j)];
      const int K = it.categories();
      const double s = out.theta.row(i).dot(it.slopes);
      detail::category_probs_at(it.link, K, it.intercepts.data(), s, it.guessing, prob);
      const double u = unif(rng);
      double acc = 0.0;
      int k = 0;
      for (; k < K - 1; ++k) {
        acc += prob[k];
        if (u < acc) break;
      }
      cells[static_cast<std::size_t>(i) * J + j] = k;
    }
  }
  out.data = ResponseMatrix(N, shape.categories, std::move(cells));
  return out;
}

RepRecord run_replication(const SimDesign& design, int rep) {
  RepRecord rec;
  rec.rep = rep;
  const Recipe& recipe = design.recipe;
  try {
    const GeneratedData gen = generate(design, rep);
    const FittedModel a = fit_em(recipe.model_a, gen.data, recipe.em);
    const FittedModel b = fit_em(recipe.model_b, gen.data, recipe.em);
    const int N = gen.data.n_persons();
    rec.converged_a = a.convergence.converged;
    rec.converged_b = b.convergence.converged;
    rec.cycles_a = a.convergence.cycles;
    rec.cycles_b = b.convergence.cycles;
    rec.loglik_a = a.total_loglik;
    rec.loglik_b = b.total_loglik;
    rec.params_a = a.n_params;
    rec.params_b = b.n_params;
    rec.aic_a = aic(a);
    rec.aic_b = aic(b);
    rec.bic_a = bic(a, N);
    rec.bic_b = bic(b, N);
    if (!rec.converged_a || !rec.converged_b) {
      rec.note = "not converged";
      return rec;
    }
    const VuongResult v = nonnested_lr_test(a, b, gen.data, recipe.alpha);
    rec.omega2_hat = v.omega2_hat;
    rec.dist_stat = v.dist_stat;
    rec.dist_p = v.dist_p;
    rec.lr_ab = v.lr_ab;
    rec.z = v.z;
    rec.p_a_better = v.p_a_better;
    rec.p_b_better = v.p_b_better;
    rec.direction = v.direction;
    rec.valid = v.valid;
    const NestingRole role = nesting_role(recipe);
    if (role.nested) {
      const FittedModel& full = role.full == 'A' ? a : b;
      const FittedModel& reduced = role.full == 'A' ? b : a;
      const NestedTestResult nt = nested_test(full, reduced, gen.data, false);
      rec.nested_lr = nt.lr_stat;
      rec.p_weighted = nt.p_weighted;
      rec.p_classical = nt.p_classical;
      const LrtResult lrt = traditional_lrt(full, reduced);
      rec.lrt_stat = lrt.stat;
      rec.lrt_df = lrt.df;
      rec.lrt_p = lrt.p;
    }
    rec.usable = true;
  } catch (const Error& e) {
    rec.usable = false;
    rec.note = e.what();
  }
  return rec;
}

SimReport run_design(const SimDesign& design) {
  design.validate();
  SimReport report;
  report.design = design;
  report.label_a = design.recipe.model_a.label;
  report.label_b = design.recipe.model_b.label;
  const NestingRole role = nesting_role(design.recipe);
  report.nested = role.nested;
  report.full_model = role.full;

  const int R = design.replications;
  report.records.resize(static_cast<std::size_t>(R));
  const int workers = std::min(design.threads, R);
  if (workers <= 1) {
    for (int r = 0; r < R; ++r) report.records[static_cast<std::size_t>(r)] = run_replication(design, r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int r = next++; r < R; r = next++)
          report.records[static_cast<std::size_t>(r)] = run_replication(design, r);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<const RepRecord*> ok;
  for (const auto& r : report.records)
    if (r.usable) ok.push_back(&r);
  SimRates& s = report.rates;
  s.n_converged = static_cast<int>(ok.size());
  s.convergence_rate = static_cast<double>(ok.size()) / R;
  if (ok.empty()) throw NumericalError("no replication produced usable fits for design '" + design.name + "'");
  const double alpha = design.recipe.alpha;
  s.dist_reject = mean_of(ok, [&](const RepRecord& r) { return r.dist_p < alpha; });
  s.lrv_a_all = mean_of(ok, [](const RepRecord& r) { return r.direction == Direction::A; });
  s.lrv_b_all = mean_of(ok, [](const RepRecord& r) { return r.direction == Direction::B; });
  s.lrv_a_valid = mean_of(ok, [](const RepRecord& r) { return r.valid && r.direction == Direction::A; });
  s.lrv_b_valid = mean_of(ok, [](const RepRecord& r) { return r.valid && r.direction == Direction::B; });
  std::vector<const RepRecord*> sig;
  for (const RepRecord* r : ok)
    if (r->dist_p < alpha) sig.push_back(r);
  s.lrv_a_given_dist = mean_of(sig, [](const RepRecord& r) { return r.direction == Direction::A; });
  s.lrv_b_given_dist = mean_of(sig, [](const RepRecord& r) { return r.direction == Direction::B; });
  s.aic_a = mean_of(ok, [](const RepRecord& r) { return r.aic_a < r.aic_b; });
  s.aic_b = 1.0 - s.aic_a;
  s.bic_a = mean_of(ok, [](const RepRecord& r) { return r.bic_a < r.bic_b; });
  s.bic_b = 1.0 - s.bic_a;
  double diff = 0.0;
  for (const RepRecord* r : ok) diff += std::abs(r->aic_a - r->aic_b);
  s.mean_abs_aic_diff = diff / static_cast<double>(ok.size());
  if (report.nested) {
    s.nested_weighted_reject = mean_of(ok, [&](const RepRecord& r) { return r.p_weighted < alpha; });
    s.nested_classical_reject = mean_of(ok, [&](const RepRecord& r) { return r.p_classical < alpha; });
    s.lrt_reject = mean_of(ok, [&](const RepRecord& r) { return r.lrt_p < alpha; });
  }
  return report;
}

std::string render_table(const SimReport& report) {
  const SimDesign& d = report.design;
  const SimRates& s = report.rates;
  std::ostringstream out;
  out << "Design " << d.name << ": generator " << to_string(d.generator.type);
  switch (d.generator.type) {
    case Generator::Hybrid: out << "(D=" << d.generator.hybrid_d << ")"; break;
    case Generator::MdTwoPl: out << "(rho=" << d.generator.rho << ")"; break;
    case Generator::ThreePlFixedG: out << "(g=" << d.generator.guessing << ")"; break;
    case Generator::Binomial: out << "(n=" << d.generator.binom_n << ", p=" << d.generator.binom_p << ")"; break;
    default: break;
  }
  out << ", N=" << d.n_persons << ", J=" << d.n_items << ", R=" << d.replications
      << ", seed=" << d.seed << ", alpha=" << d.recipe.alpha << "\n";
  out << "Models: A = " << report.label_a << ", B = " << report.label_b;
  if (report.nested) out << " (nested; full model " << report.full_model << ")";
  else out << " (non-nested)";
  out << "\nConverged: " << s.n_converged << "/" << d.replications << " (" << rate(s.convergence_rate) << ")\n\n";
  out << "Empirical preference/rejection rates\n";
  if (report.nested) {
    const std::string full = report.full_model == 'A' ? report.label_a : report.label_b;
    out << "  (preference of " << full << ")\n";
    out << "  N       Dist    LRT_v   LRT_t   AIC     BIC\n";
    const double aic_full = report.full_model == 'A' ? s.aic_a : s.aic_b;
    const double bic_full = report.full_model == 'A' ? s.bic_a : s.bic_b;
    out << "  " << std::left << std::setw(8) << d.n_persons << rate(s.dist_reject) << "   "
        << rate(s.nested_weighted_reject) << "   " << rate(s.lrt_reject) << "   " << rate(aic_full)
        << "   " << rate(bic_full) << "\n";
  } else {
    out << "                  " << std::left << std::setw(30) << ("A: " + report.label_a)
        << ("B: " + report.label_b) << "\n";
    out << "  N       Dist    LRT_v  (Dist sgn.)  AIC     LRT_v  (Dist sgn.)  AIC\n";
    out << "  " << std::left << std::setw(8) << d.n_persons << rate(s.dist_reject) << "   "
        << rate(s.lrv_a_all) << "  (" << rate(s.lrv_a_given_dist) << ")      " << rate(s.aic_a) << "   "
        << rate(s.lrv_b_all) << "  (" << rate(s.lrv_b_given_dist) << ")      " << rate(s.aic_b) << "\n";
    out << "\n  Valid LRT_v preferences (Dist significant): A " << rate(s.lrv_a_valid) << ", B "
        << rate(s.lrv_b_valid) << "\n";
  }
  out << "  Mean |AIC_A - AIC_B|: " << std::fixed << std::setprecision(3) << s.mean_abs_aic_diff << "\n";
  return out.str();
}

ModelSpec half_constrained_2pl(const DataShape& shape, bool first_half_equal) {
  ModelSpec spec = make_spec(Family::TwoPL, shape);
  const int J = shape.n_items();
  const int half = J / 2;
  std::vector<int> first, second;
  for (int j = 0; j < J; ++j) (j < half ? first : second).push_back(j);
  set_slope(spec, first_half_equal ? first : second, 0, SlopeConstraint::equal(0));
  set_slope(spec, first_half_equal ? second : first, 0, SlopeConstraint::fixed(1.0));
  spec.label = first_half_equal ? "2PLM1" : "2PLM2";
  return spec;
}

std::vector<std::string> preset_names() { return {"twin-2pl", "hybrid", "rasch-2pl", "2pl-2d2pl", "binomial"}; }

SimDesign preset_design(const std::string& name, int n_persons, int n_items, int replications,
                        std::uint64_t seed) {
  SimDesign d;
  d.name = name;
  d.n_persons = n_persons;
  d.n_items = n_items;
  d.replications = replications;
  d.seed = seed;
  if (name == "twin-2pl") {
    d.generator.type = Generator::Rm;
    d.recipe.model_a = half_constrained_2pl(d.shape(), true);
    d.recipe.model_b = half_constrained_2pl(d.shape(), false);
  } else if (name == "hybrid" || name == "binomial") {
    d.generator.type = name == "hybrid" ? Generator::Hybrid : Generator::Binomial;
    d.recipe.model_a = make_spec(Family::Grm, d.shape());
    d.recipe.model_b = make_spec(Family::Gpcm, d.shape());
  } else if (name == "rasch-2pl") {
    d.generator.type = Generator::Rm;
    d.recipe.model_a = make_spec(Family::Rasch, d.shape());
    d.recipe.model_b = make_spec(Family::TwoPL, d.shape());
  } else if (name == "2pl-2d2pl") {
    d.generator.type = Generator::TwoPl;
    d.recipe.model_a = make_spec(Family::TwoPL, d.shape());
    d.recipe.model_b = make_spec(Family::MdTwoPL, d.shape(), 2);
    d.recipe.model_b.label = "2d-2PLM";
  } else {
    throw InputError("unknown preset design '" + name + "'");
  }
  return d;
}

}  // namespace irtvuong
