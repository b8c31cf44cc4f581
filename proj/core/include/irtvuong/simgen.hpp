#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irtvuong/data.hpp"
#include "irtvuong/estimation.hpp"
#include "irtvuong/models.hpp"
#include "irtvuong/vuong.hpp"

namespace irtvuong {

enum class Generator { Rm, TwoPl, ThreePlFixedG, Grm, Gpcm, Hybrid, MdTwoPl, Binomial };
std::string to_string(Generator g);
Generator generator_from_string(const std::string& name);

struct GeneratorSpec {
  Generator type = Generator::Rm;
  int categories = 4;      // GRM, GPCM, HYBRID
  int hybrid_d = 0;        // HYBRID: first D items follow the GPCM
  double guessing = 0.25;  // THREE_PL_FIXED_G
  double rho = 0.0;        // MD_TWO_PL latent correlation
  int binom_n = 3;         // BINOMIAL
  double binom_p = 0.5;
};

// Models to fit on every replication and the test level.
struct Recipe {
  ModelSpec model_a;
  ModelSpec model_b;
  double alpha = 0.05;
  EmConfig em;
};

struct SimDesign {
  std::string name;
  GeneratorSpec generator;
  int n_persons = 500;
  int n_items = 10;
  int replications = 200;
  std::uint64_t seed = 1;
  int threads = 1;
  Recipe recipe;

  // Declared categories per item implied by the generator.
  DataShape shape() const;
  void validate() const;
};

struct GeneratedData {
  ResponseMatrix data;
  std::vector<ItemParams> items;     // generating item parameters
  std::vector<std::string> families;  // per item: "RM", "2PL", "3PL", "GRM", "GPCM", "MD2PL", "BINOMIAL"
  Eigen::MatrixXd theta;              // N x M generating traits (empty for BINOMIAL)
};

// Replication `rep` of a design. The stream is a 64-bit Mersenne twister
// seeded from (seed, rep), so replications are independent of each other
// and of evaluation order. Draw order: item parameters, traits, responses.
GeneratedData generate(const SimDesign& design, int rep);

struct RepRecord {
  int rep = 0;
  bool converged_a = false;
  bool converged_b = false;
  bool usable = false;  // both converged and every statistic computed
  std::string note;     // failure reason when not usable
  int cycles_a = 0, cycles_b = 0;
  double loglik_a = 0.0, loglik_b = 0.0;
  int params_a = 0, params_b = 0;
  double aic_a = 0.0, aic_b = 0.0, bic_a = 0.0, bic_b = 0.0;
  double omega2_hat = 0.0, dist_stat = 0.0, dist_p = 1.0;
  double lr_ab = 0.0, z = 0.0, p_a_better = 0.5, p_b_better = 0.5;
  Direction direction = Direction::Neither;
  bool valid = false;
  // Nested pairs only.
  double nested_lr = 0.0, p_weighted = 1.0, p_classical = 1.0, lrt_stat = 0.0, lrt_p = 1.0;
  int lrt_df = 0;
};

struct SimRates {
  int n_converged = 0;
  double convergence_rate = 0.0;
  double dist_reject = 0.0;
  // Non-nested LR preferences: over all usable replications, restricted to
  // valid ones (distinguishability significant), and conditional on a
  // significant distinguishability test (NaN when none was significant).
  double lrv_a_all = 0.0, lrv_b_all = 0.0;
  double lrv_a_valid = 0.0, lrv_b_valid = 0.0;
  double lrv_a_given_dist = 0.0, lrv_b_given_dist = 0.0;
  double aic_a = 0.0, aic_b = 0.0;  // lower AIC
  double bic_a = 0.0, bic_b = 0.0;
  double mean_abs_aic_diff = 0.0;
  // Nested pairs: rejection rates in favor of the full model.
  double nested_weighted_reject = 0.0;
  double nested_classical_reject = 0.0;
  double lrt_reject = 0.0;
};

struct SimReport {
  SimDesign design;
  bool nested = false;
  char full_model = ' ';  // 'A' or 'B' when nested
  std::string label_a, label_b;
  SimRates rates;
  std::vector<RepRecord> records;
};

// Fits both recipe models on one replication and computes every statistic.
RepRecord run_replication(const SimDesign& design, int rep);

SimReport run_design(const SimDesign& design);

// Plain-text summary table: one row of rejection and preference rates.
std::string render_table(const SimReport& report);

// Ready-made designs. The generator can be adjusted afterwards (HYBRID's D,
// 2PL or 3PL data for "rasch-2pl", MD-2PL data for "2pl-2d2pl").
//   "twin-2pl"      RM data; two non-nested half-constrained 2PLMs
//   "hybrid"        HYBRID(D = 0) data; GRM (A) vs GPCM (B), K = 4
//   "rasch-2pl"     RM data; RM (A) vs 2PLM (B)
//   "2pl-2d2pl"     2PL data; 2PLM (A) vs 2d-2PLM (B)
//   "binomial"      BINOMIAL(3, 0.5) data; GRM (A) vs GPCM (B)
SimDesign preset_design(const std::string& name, int n_persons, int n_items, int replications,
                        std::uint64_t seed);
std::vector<std::string> preset_names();

// Half-constrained 2PLM: the slopes of one half of the items share one
// equality class, the other half is fixed at 1.
ModelSpec half_constrained_2pl(const DataShape& shape, bool first_half_equal);

}  // namespace irtvuong
