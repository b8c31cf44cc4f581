#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <irtvuong/simgen.hpp>

#include "cli.hpp"

using namespace irtvuong;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "irtvuong");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "irtvuong_cli_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dataset(const std::string& preset, int n, int j, std::uint64_t seed, const std::string& name) {
  fs::path p = scratch() / name;
  write_csv(generate(preset_design(preset, n, j, 1, seed), 0).data, p);
  return p.string();
}

}  // namespace

TEST_CASE("fit recovers the Rasch latent variance") {
  const std::string data = dataset("rasch-2pl", 2000, 10, 4, "rm.csv");
  const std::string out = (scratch() / "rm_fit.json").string();
  Run r = run_cli({"fit", "--data", data, "--model", "RASCH", "--out", out});
  REQUIRE(r.code == 0);
  json doc = json::parse(slurp(out));
  CHECK(doc["convergence"]["converged"].get<bool>());
  double var = -1.0;
  for (const auto& p : doc["parameters"])
    if (p["label"] == "latent.var") var = p["estimate"].get<double>();
  CHECK(var > 0.8);
  CHECK(var < 1.2);
}

TEST_CASE("graded fit on dichotomous data equals the 2PL fit") {
  const std::string data = dataset("twin-2pl", 800, 6, 5, "dich.csv");
  Run a = run_cli({"fit", "--data", data, "--model", "GRM", "--format", "json", "--tol", "1e-6"});
  Run b = run_cli({"fit", "--data", data, "--model", "2PL", "--format", "json", "--tol", "1e-6"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(std::abs(json::parse(a.out)["loglik"].get<double>() - json::parse(b.out)["loglik"].get<double>()) < 1e-6);
}

TEST_CASE("casewise output has one row per person") {
  const std::string data = dataset("twin-2pl", 150, 4, 6, "small.csv");
  const std::string cw = (scratch() / "cw.csv").string();
  Run r = run_cli({"fit", "--data", data, "--model", "2PL", "--casewise", cw});
  REQUIRE(r.code == 0);
  std::ifstream in(cw);
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 151);
}

TEST_CASE("malformed CSV exits 1 with a location") {
  fs::path bad = scratch() / "bad.csv";
  std::ofstream(bad) << "0,1\n1,z\n";
  Run r = run_cli({"fit", "--data", bad.string(), "--model", "2PL"});
  CHECK(r.code == 1);
  CHECK(r.err.find("line 2") != std::string::npos);
  CHECK(run_cli({"fit", "--data", (scratch() / "missing.csv").string(), "--model", "2PL"}).code == 1);
  CHECK(run_cli({"fit", "--data", bad.string()}).code == 1);
  CHECK(run_cli({"fit", "--data", bad.string(), "--model", "NOPE"}).code == 1);
}

TEST_CASE("cycle limit exits 2") {
  const std::string data = dataset("hybrid", 300, 5, 7, "poly.csv");
  Run r = run_cli({"fit", "--data", data, "--model", "GRM", "--max-cycles", "1"});
  CHECK(r.code == 2);
}

TEST_CASE("help exits 0") { CHECK(run_cli({"--help"}).code == 0); }

TEST_CASE("graded model preferred on graded data") {
  const std::string data = dataset("hybrid", 2000, 10, 8, "grm.csv");
  Run r = run_cli({"compare", "--data", data, "--model-a", "GRM", "--model-b", "GPCM", "--format", "json"});
  REQUIRE(r.code == 0);
  json doc = json::parse(r.out);
  CHECK(doc["nesting"]["path"] == "non-nested");
  CHECK(doc["distinguishability"]["significant"].get<bool>());
  CHECK(doc["nonnested_lr"]["direction"] == "A");
}

TEST_CASE("swapping models mirrors the comparison") {
  const std::string data = dataset("hybrid", 500, 6, 9, "mirror.csv");
  Run ab = run_cli({"compare", "--data", data, "--model-a", "GRM", "--model-b", "GPCM", "--format", "json"});
  Run ba = run_cli({"compare", "--data", data, "--model-a", "GPCM", "--model-b", "GRM", "--format", "json"});
  REQUIRE(ab.code == 0);
  REQUIRE(ba.code == 0);
  json x = json::parse(ab.out), y = json::parse(ba.out);
  CHECK(x["distinguishability"]["omega2_hat"].get<double>() ==
        doctest::Approx(y["distinguishability"]["omega2_hat"].get<double>()).epsilon(1e-12));
  CHECK(x["distinguishability"]["p"].get<double>() ==
        doctest::Approx(y["distinguishability"]["p"].get<double>()).epsilon(1e-9));
  CHECK(x["nonnested_lr"]["z"].get<double>() == doctest::Approx(-y["nonnested_lr"]["z"].get<double>()).epsilon(1e-12));
  const std::string da = x["nonnested_lr"]["direction"], db = y["nonnested_lr"]["direction"];
  if (da == "A") CHECK(db == "B");
  if (da == "B") CHECK(db == "A");
  if (da == "neither") CHECK(db == "neither");
  CHECK(x["config"].contains("model_a"));
}

TEST_CASE("a model compared with itself is indistinguishable") {
  const std::string data = dataset("hybrid", 400, 5, 10, "self.csv");
  Run r = run_cli({"compare", "--data", data, "--model-a", "GRM", "--model-b", "GRM", "--format", "json"});
  REQUIRE(r.code == 0);
  json doc = json::parse(r.out);
  CHECK(doc["distinguishability"]["p"].get<double>() == 1.0);
  CHECK_FALSE(doc["distinguishability"]["significant"].get<bool>());
}

TEST_CASE("nested comparison shows all three tests") {
  const std::string data = dataset("rasch-2pl", 600, 6, 11, "nested.csv");
  Run r = run_cli({"compare", "--data", data, "--model-a", "RASCH", "--model-b", "2PL", "--format", "json"});
  REQUIRE(r.code == 0);
  json doc = json::parse(r.out);
  CHECK(doc["nesting"]["path"] == "nested");
  CHECK(doc["nesting"]["full_model"] == "B");
  CHECK(doc.contains("nested_lr"));
  CHECK(doc.contains("traditional_lrt"));
  CHECK(doc.contains("distinguishability"));
  CHECK_FALSE(doc.contains("nonnested_lr"));
  for (const char* key : {"p_weighted", "p_classical"}) {
    const double p = doc["nested_lr"][key].get<double>();
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  Run table = run_cli({"compare", "--data", data, "--model-a", "RASCH", "--model-b", "2PL"});
  CHECK(table.code == 0);
  CHECK(table.out.find("Distinguishability") != std::string::npos);
}

TEST_CASE("simulate with one replication") {
  const std::string out = (scratch() / "sim1.json").string();
  Run r = run_cli({"simulate", "--preset", "twin-2pl", "-N", "200", "-J", "6", "-R", "1", "--seed", "3", "--out", out});
  REQUIRE(r.code == 0);
  json doc = json::parse(slurp(out));
  CHECK(doc["records"].size() == 1);
  CHECK(doc["design"]["seed"] == 3);
  CHECK(r.out.find("Dist") != std::string::npos);
}

TEST_CASE("rerunning a design reproduces the output file") {
  const std::string a = (scratch() / "rerun_a.json").string(), b = (scratch() / "rerun_b.json").string();
  std::vector<std::string> args{"simulate", "--preset", "hybrid", "-N", "200", "-J", "5", "-R", "2", "--seed", "17"};
  auto with = [&](const std::string& out) {
    auto v = args;
    v.push_back("--out");
    v.push_back(out);
    return v;
  };
  REQUIRE(run_cli(with(a)).code == 0);
  REQUIRE(run_cli(with(b)).code == 0);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("design files and generator overrides") {
  fs::path design = scratch() / "design.json";
  std::ofstream(design) << R"({"preset": "hybrid", "N": 500, "J": 5, "replications": 1, "seed": 2})";
  Run r = run_cli({"simulate", "--design", design.string(), "--generator", R"({"D": 2})", "--format", "json"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["design"]["generator"]["D"] == 2);

  fs::path broken = scratch() / "broken.json";
  std::ofstream(broken) << R"({"preset": "hybrid", "N": "many"})";
  CHECK(run_cli({"simulate", "--design", broken.string()}).code == 1);
  CHECK(run_cli({"simulate"}).code == 1);
}

TEST_CASE("generate writes the replication's data") {
  Run r = run_cli({"generate", "--preset", "binomial", "-N", "20", "-J", "3", "--seed", "5", "--rep", "1"});
  REQUIRE(r.code == 0);
  CsvOptions opts;
  opts.categories = std::vector<int>(3, 4);
  CHECK(parse_csv(r.out, opts).data == generate(preset_design("binomial", 20, 3, 1, 5), 1).data);
}
