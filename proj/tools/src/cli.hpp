#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <irtvuong/data.hpp>
#include <irtvuong/estimation.hpp>
#include <irtvuong/json_io.hpp>
#include <irtvuong/models.hpp>
#include <irtvuong/nesting.hpp>
#include <irtvuong/vuong.hpp>

namespace irtvuong::cli {

enum ExitCode { kOk = 0, kInputError = 1, kNotConverged = 2 };

struct DataOptions {
  std::string path;
  bool header = false;
  std::vector<std::string> na_codes{"NA", ""};
};

struct FitSettings {
  int quad_points = 0;
  int max_cycles = 5000;
  double tol = 1e-4;
  EmConfig em() const;
};

struct FitOptions {
  DataOptions data;
  std::string model;
  FitSettings fit;
  std::string out;           // FittedModel JSON
  std::string casewise_out;  // casewise loglik and scores CSV
  std::string format = "table";
};

// "" lets nests() decide; "a-in-b" / "b-in-a" declare the pair nested.
struct CompareOptions {
  DataOptions data;
  std::string model_a;
  std::string model_b;
  FitSettings fit;
  double alpha = 0.05;
  bool assume_correct = false;
  std::string force_nested;
  std::string out;
  std::string format = "table";
};

struct SimulateOptions {
  std::string design;  // JSON file
  std::string preset;
  std::optional<int> n_persons, n_items, replications, threads, quad_points, max_cycles;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha, tol;
  std::string generator;  // inline JSON merged into the design's generator
  std::string out;
  std::string format = "table";
};

struct GenerateOptions {
  SimulateOptions design;
  int rep = 0;
  std::string out;  // CSV; stdout when empty
};

struct ModelSummary {
  std::string label;
  double loglik = 0.0;
  int n_params = 0;
  double aic = 0.0;
  double bic = 0.0;
  bool converged = false;
  int cycles = 0;
  double condition_number = 0.0;
  std::vector<std::string> flags;
};

struct ComparisonReport {
  json config;
  ModelSummary a, b;
  NestingVerdict nesting;
  char full_model = ' ';  // 'A' or 'B' on the nested path
  bool forced_nesting = false;
  std::optional<VuongResult> vuong;
  std::optional<NestedTestResult> nested;
  std::optional<LrtResult> lrt;
  std::vector<std::string> narrative;
  bool complete = false;  // every block computed
};

struct CompareSettings {
  double alpha = 0.05;
  bool assume_correct = false;
  std::string force_nested;
  EmConfig em;
};

ModelSummary summarize_fit(const FittedModel& fit);

// Fits both models and runs the comparison workflow: distinguishability
// first, then the non-nested LR test, or on nested pairs the weighted and
// classical nested tests plus the traditional LRT. Numerical refusals end
// the workflow early with complete == false.
ComparisonReport compare_models(const ResponseMatrix& data, const ModelSpec& a, const ModelSpec& b,
                                const CompareSettings& settings);

json to_json(const ComparisonReport& report);
std::string render(const ComparisonReport& report);

int cmd_fit(const FitOptions& options, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareOptions& options, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err);
int cmd_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err);

// Full command line: `irtvuong <fit|compare|simulate|generate> ...`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace irtvuong::cli
