// Acceptance run: Monte Carlo designs at R = 200 plus the fast oracle
// equivalences. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails. IRTVUONG_ACCEPT_REPS overrides R for quick
// local runs (the bands are only meaningful at 200).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include <irtvuong/estimation.hpp>
#include <irtvuong/quadform.hpp>
#include <irtvuong/simgen.hpp>
#include <irtvuong/vuong.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace irtvuong;

namespace {

int reps() {
  if (const char* env = std::getenv("IRTVUONG_ACCEPT_REPS")) return std::max(1, std::atoi(env));
  return 200;
}

struct Verdict {
  int id;
  bool pass;
  std::string detail;
};
std::vector<Verdict> verdicts;

void record(int id, bool pass, const std::string& detail) {
  verdicts.push_back({id, pass, detail});
  std::printf("  -> criterion %d %s: %s\n", id, pass ? "pass" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

SimReport run(const std::string& preset, int n, std::uint64_t seed, void (*adjust)(SimDesign&) = nullptr) {
  SimDesign d = preset_design(preset, n, 10, reps(), seed);
  if (adjust) adjust(d);
  const auto t0 = std::chrono::steady_clock::now();
  SimReport r = run_design(d);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("\n[%s N=%d R=%d seed=%llu] %.1f s, usable %d/%d\n", preset.c_str(), n, d.replications,
              static_cast<unsigned long long>(seed), secs, r.rates.n_converged, d.replications);
  std::printf("%s", render_table(r).c_str());
  std::fflush(stdout);
  return r;
}

std::string rate(const char* name, double v) { return std::string(name) + "=" + fmt("%.3f", v) + " "; }

void criterion1() {
  SimReport r = run("twin-2pl", 500, 101);
  const auto& s = r.rates;
  const bool pass = within(s.dist_reject, 0.02, 0.09) && within(s.aic_a, 0.41, 0.59) && within(s.aic_b, 0.41, 0.59) &&
                    s.lrv_a_valid <= 0.03 && s.lrv_b_valid <= 0.03;
  record(1, pass,
         rate("Dist", s.dist_reject) + rate("AIC_A", s.aic_a) + rate("AIC_B", s.aic_b) +
             rate("LRTv_A", s.lrv_a_valid) + rate("LRTv_B", s.lrv_b_valid));
}

void criterion2() {
  SimReport small = run("hybrid", 500, 201);
  SimReport large = run("hybrid", 2000, 202);
  const double p500 = small.rates.lrv_a_all, p2000 = large.rates.lrv_a_all;
  const bool pass = std::abs(p500 - 0.67) <= 0.10 && p2000 >= 0.95 && small.rates.dist_reject == 1.0 &&
                    large.rates.dist_reject == 1.0;
  record(2, pass,
         rate("GRM_pref_N500", p500) + rate("GRM_pref_N2000", p2000) + rate("Dist_N500", small.rates.dist_reject) +
             rate("Dist_N2000", large.rates.dist_reject));
}

SimReport rasch_null;

void criterion3() {
  rasch_null = run("rasch-2pl", 2000, 301);
  SimReport power = run("rasch-2pl", 500, 302, [](SimDesign& d) { d.generator.type = Generator::TwoPl; });
  const auto& n = rasch_null.rates;
  const auto& p = power.rates;
  const bool pass = std::abs(n.nested_weighted_reject - 0.04) <= 0.03 && std::abs(n.lrt_reject - 0.04) <= 0.03 &&
                    std::abs(n.dist_reject - 0.04) <= 0.03 && std::abs(p.nested_weighted_reject - 0.75) <= 0.07 &&
                    std::abs(p.lrt_reject - 0.77) <= 0.07;
  record(3, pass,
         rate("null_LRTv", n.nested_weighted_reject) + rate("null_LRTt", n.lrt_reject) +
             rate("null_Dist", n.dist_reject) + rate("power_LRTv", p.nested_weighted_reject) +
             rate("power_LRTt", p.lrt_reject));
}

void criterion4() {
  SimReport r = run("2pl-2d2pl", 2000, 401);
  const auto& s = r.rates;
  const bool pass = s.lrt_reject >= 0.18 && s.nested_weighted_reject <= 0.10 && s.dist_reject <= 0.07;
  record(4, pass, rate("LRTt", s.lrt_reject) + rate("LRTv", s.nested_weighted_reject) + rate("Dist", s.dist_reject));
}

void criterion5() {
  SimReport r = run("binomial", 2000, 501);
  record(5, r.rates.dist_reject <= 0.03, rate("Dist", r.rates.dist_reject));
}

void criterion6() {
  SimReport r = run("twin-2pl", 2000, 601);
  std::vector<double> p;
  for (const auto& rec : r.records)
    if (rec.usable) p.push_back(rec.dist_p);
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    d = std::max({d, (i + 1) / n - p[i], p[i] - i / n});
  const double sn = std::sqrt(n);
  const double ks_p = oracle::kolmogorov_tail(d * (sn + 0.12 + 0.11 / sn));
  record(6, !p.empty() && ks_p >= 0.01, "D=" + fmt("%.4f", d) + " KS_p=" + fmt("%.4f", ks_p) + " n=" + fmt("%.0f", n));
}

void criterion7() {
  bool ok = true;
  std::string detail;

  double worst_tail = 0.0;
  for (int k = 1; k <= 5; ++k) {
    std::vector<double> w(static_cast<std::size_t>(k), 1.0);
    for (int i = 0; i < 30; ++i) {
      const double x = 0.05 + 0.6 * i;
      worst_tail = std::max(worst_tail, std::abs(upper_tail(w, x) - oracle::chi2_survival(k, x)));
    }
  }
  ok &= worst_tail < 1e-7;
  detail += "tail_err=" + fmt("%.2e", worst_tail) + " ";

  std::mt19937_64 rng(7007);
  double worst_score = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    const int J = 3 + draw % 3;
    DataShape shape;
    ModelSpec spec;
    if (draw % 4 == 0) {
      shape.categories.assign(J, 2);
      spec = make_spec(Family::TwoPL, shape);
    } else if (draw % 4 == 1) {
      shape.categories.assign(J, 2);
      spec = make_spec(Family::Rasch, shape);
    } else {
      for (int j = 0; j < J; ++j) shape.categories.push_back(2 + (j + draw) % 3);
      spec = make_spec(draw % 4 == 2 ? Family::Grm : Family::Gpcm, shape);
    }
    std::vector<int> cells;
    for (int i = 0; i < 25; ++i)
      for (int K : shape.categories) cells.push_back(std::uniform_int_distribution<int>(0, K - 1)(rng));
    ResponseMatrix data(25, shape.categories, cells);
    ParameterVector x = fixture::random_params(spec, rng);
    MarginalEngine engine(spec, data, 31);
    engine.e_step(x);
    Eigen::MatrixXd S = engine.scores();
    for (Eigen::Index p = 0; p < x.size(); ++p) {
      ParameterVector up = x, dn = x;
      up[p] += 1e-5;
      dn[p] -= 1e-5;
      Eigen::VectorXd fd =
          (marginal_loglik(spec, up, data, 31).casewise - marginal_loglik(spec, dn, data, 31).casewise) / 2e-5;
      worst_score = std::max(worst_score, (S.col(p) - fd).cwiseAbs().maxCoeff());
    }
  }
  ok &= worst_score < 1e-4;
  detail += "score_err=" + fmt("%.2e", worst_score) + " ";

  std::vector<double> a{-1.0, -1.0}, b{-2.0, -3.0};
  auto lr = nonnested_lr(a, b, 0.05);
  const double hand_err = std::max({std::abs(omega2_hat(a, b) - 0.25), std::abs(lr.lr_ab - 3.0 / std::sqrt(2.0)),
                                    std::abs(lr.z - 6.0 / std::sqrt(2.0))});
  ok &= hand_err < 1e-10 && lr.direction == Direction::A;
  detail += "hand_err=" + fmt("%.2e", hand_err) + " ";

  SimDesign d = preset_design("rasch-2pl", 1000, 8, 1, 707);
  d.generator.type = Generator::TwoPl;
  ResponseMatrix data = generate(d, 0).data;
  EmConfig cfg;
  cfg.param_tol = 1e-6;
  const double l2 = fit_em(make_spec(Family::TwoPL, data.shape()), data, cfg).total_loglik;
  const double lg = fit_em(make_spec(Family::Grm, data.shape()), data, cfg).total_loglik;
  const double lp = fit_em(make_spec(Family::Gpcm, data.shape()), data, cfg).total_loglik;
  const double red_err = std::max(std::abs(lg - l2), std::abs(lp - l2));
  ok &= red_err < 1e-6;
  detail += "reduction_err=" + fmt("%.2e", red_err);
  record(7, ok, detail);
}

void criterion8() {
  const auto& s = rasch_null.rates;
  const double gap = std::abs(s.nested_weighted_reject - s.nested_classical_reject);
  record(8, gap < 0.03,
         rate("weighted", s.nested_weighted_reject) + rate("classical", s.nested_classical_reject) + rate("gap", gap));
}

}  // namespace

int main() {
  std::printf("replications per design: %d\n", reps());
  criterion7();
  criterion1();
  criterion2();
  criterion3();
  criterion8();
  criterion4();
  criterion5();
  criterion6();

  std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& x, const Verdict& y) { return x.id < y.id; });
  std::printf("\n");
  bool all = true;
  for (const auto& v : verdicts) {
    std::printf("%s criterion %d: %s\n", v.pass ? "PASS" : "FAIL", v.id, v.detail.c_str());
    all &= v.pass;
  }
  return all ? 0 : 1;
}
