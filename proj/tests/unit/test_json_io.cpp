#include <doctest.h>

#include <cmath>

#include <irtvuong/errors.hpp>
#include <irtvuong/json_io.hpp>

using namespace irtvuong;

namespace {

void check_same_spec(const ModelSpec& a, const ModelSpec& b) {
  CHECK(a.family == b.family);
  CHECK(a.n_dims == b.n_dims);
  CHECK(a.categories == b.categories);
  CHECK(a.slopes == b.slopes);
  CHECK(a.links == b.links);
  CHECK(a.latent == b.latent);
  CHECK(a.label == b.label);
  if (a.latent == LatentStructure::FixedCorrelation) CHECK(a.correlation.isApprox(b.correlation));
}

}  // namespace

TEST_CASE("specs survive a JSON round trip") {
  DataShape shape{{2, 2, 2, 2, 2, 2}};
  std::vector<ModelSpec> specs = {make_spec(Family::Rasch, shape), make_spec(Family::TwoPL, shape),
                                  make_spec(Family::MdTwoPL, shape, 2), half_constrained_2pl(shape, true),
                                  make_spec(Family::Grm, DataShape{{4, 3, 5}}),
                                  make_spec(Family::Gpcm, DataShape{{4, 3, 5}})};
  ModelSpec corr = make_spec(Family::MdTwoPL, shape, 2);
  corr.latent = LatentStructure::FixedCorrelation;
  corr.correlation = Eigen::Matrix2d{{1.0, 0.3}, {0.3, 1.0}};
  specs.push_back(corr);
  for (const auto& s : specs) {
    json doc = spec_to_json(s);
    check_same_spec(spec_from_json(doc, s.shape()), s);
    check_same_spec(spec_from_json(doc), s);
    check_same_spec(spec_from_json(json::parse(doc.dump())), s);
  }
}

TEST_CASE("spec documents with explicit slope entries") {
  DataShape shape{{2, 2, 2, 2}};
  json doc = json::parse(R"({"family": "2PL", "label": "custom",
      "slopes": [{"items": [1, 2], "dim": 1, "equal": 0}, {"items": [4], "dim": 1, "fixed": 1.5}]})");
  ModelSpec s = spec_from_json(doc, shape);
  CHECK(s.label == "custom");
  CHECK(s.slopes[0][0] == SlopeConstraint::equal(0));
  CHECK(s.slopes[1][0] == SlopeConstraint::equal(0));
  CHECK(s.slopes[2][0] == SlopeConstraint::free());
  CHECK(s.slopes[3][0] == SlopeConstraint::fixed(1.5));
  CHECK(ParameterLayout(s).size() == 4 + 1 + 1);
}

TEST_CASE("command-line spec arguments") {
  DataShape shape{{3, 3}};
  CHECK(load_spec("GRM", shape).family == Family::Grm);
  CHECK(load_spec(R"({"family": "GPCM"})", shape).family == Family::Gpcm);
  CHECK_THROWS_AS(load_spec("{not json", shape), InputError);
  CHECK_THROWS_AS(spec_from_json(json::parse(R"({"family": "GRM", "categories": [3]})"), shape), InputError);
  CHECK_THROWS_AS(spec_from_json(json::parse(R"({"family": "GRM"})")), InputError);
}

TEST_CASE("EM config and designs round trip") {
  EmConfig c;
  c.max_cycles = 77;
  c.param_tol = 1e-5;
  c.quad_points = 21;
  c.polish_after = 0;
  EmConfig back = em_config_from_json(to_json(c));
  CHECK(back.max_cycles == 77);
  CHECK(back.param_tol == 1e-5);
  CHECK(back.quad_points == 21);
  CHECK(back.polish_after == 0);

  for (const auto& name : preset_names()) {
    SimDesign d = preset_design(name, 321, 6, 7, 99);
    d.threads = 2;
    SimDesign e = design_from_json(to_json(d));
    CHECK(e.name == d.name);
    CHECK(e.n_persons == 321);
    CHECK(e.n_items == 6);
    CHECK(e.replications == 7);
    CHECK(e.seed == 99);
    CHECK(e.threads == 2);
    CHECK(e.generator.type == d.generator.type);
    check_same_spec(e.recipe.model_a, d.recipe.model_a);
    check_same_spec(e.recipe.model_b, d.recipe.model_b);
    CHECK(to_json(e) == to_json(d));
  }
}

TEST_CASE("presets can be adjusted from a design document") {
  SimDesign d = design_from_json(json::parse(R"({"preset": "hybrid", "N": 250, "generator": {"D": 3}})"));
  CHECK(d.generator.type == Generator::Hybrid);
  CHECK(d.generator.hybrid_d == 3);
  CHECK(d.n_persons == 250);
  CHECK_THROWS_AS(design_from_json(json::parse(R"({"preset": "hybrid", "N": -5})")), InputError);
}

TEST_CASE("non-finite numbers serialize as null") {
  SimRates r;
  r.lrv_a_given_dist = std::nan("");
  json j = to_json(r);
  CHECK(j.dump().find("null") != std::string::npos);
  CHECK(j.dump().find("nan") == std::string::npos);
}
