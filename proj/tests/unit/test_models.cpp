#include <doctest.h>

#include <random>

#include <irtvuong/errors.hpp>
#include <irtvuong/models.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace irtvuong;
using doctest::Approx;

namespace {

ItemParams item(Link link, double a, std::vector<double> b, double g = 0.0) {
  ItemParams it;
  it.link = link;
  it.slopes = Eigen::VectorXd::Constant(1, a);
  it.intercepts = Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  it.guessing = g;
  return it;
}

Eigen::VectorXd at(double t) { return Eigen::VectorXd::Constant(1, t); }

}  // namespace

TEST_CASE("hand-evaluated category probabilities") {
  auto p2 = item_category_probs(item(Link::Graded, 1.0, {0.0}), at(0.0));
  CHECK(p2[0] == Approx(0.5).epsilon(1e-12));
  CHECK(p2[1] == Approx(0.5).epsilon(1e-12));

  const double s1 = oracle::logistic(1.0), sm1 = oracle::logistic(-1.0);
  auto grm = item_category_probs(item(Link::Graded, 1.0, {1.0, -1.0}), at(0.0));
  CHECK(grm[0] == Approx(1.0 - s1).epsilon(1e-12));
  CHECK(grm[1] == Approx(s1 - sm1).epsilon(1e-12));
  CHECK(grm[2] == Approx(sm1).epsilon(1e-12));
  CHECK(std::abs(grm[0] - 0.26894) < 5e-6);
  CHECK(std::abs(grm[1] - 0.46212) < 5e-6);

  auto gpcm = item_category_probs(item(Link::PartialCredit, 1.0, {1.0, -1.0}), at(0.0));
  const double den = 1.0 + std::exp(1.0) + 1.0;
  CHECK(gpcm[0] == Approx(1.0 / den).epsilon(1e-12));
  CHECK(gpcm[1] == Approx(std::exp(1.0) / den).epsilon(1e-12));
  CHECK(std::abs(gpcm[1] - 0.57612) < 5e-6);
  CHECK(std::abs(gpcm[2] - 0.21194) < 5e-6);

  auto g3 = item_category_probs(item(Link::Guessing, 1.0, {0.0}, 0.25), at(0.0));
  CHECK(g3[1] == Approx(0.625).epsilon(1e-12));
}

TEST_CASE("2PL intercept derivative at zero is a quarter") {
  auto J = item_category_prob_grad(item(Link::Graded, 1.0, {0.0}), at(0.0));
  REQUIRE(J.rows() == 2);
  REQUIRE(J.cols() == 2);
  CHECK(J(1, 1) == Approx(0.25).epsilon(1e-12));
  CHECK(J(1, 0) == Approx(0.0).epsilon(1e-12));  // theta = 0 kills the slope derivative
}

TEST_CASE("natural Jacobian matches central differences") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0.0, 1.0);
  for (Link link : {Link::Graded, Link::PartialCredit, Link::Guessing}) {
    for (int K : {2, 3, 5}) {
      if (link == Link::Guessing && K != 2) continue;
      for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> b(static_cast<std::size_t>(K - 1));
        for (std::size_t k = 0; k < b.size(); ++k) b[k] = 1.0 - 0.8 * static_cast<double>(k) + 0.3 * z(rng);
        ItemParams it = item(link, std::exp(0.3 * z(rng)), b, link == Link::Guessing ? 0.2 : 0.0);
        Eigen::VectorXd theta = at(z(rng));
        Eigen::MatrixXd J = item_category_prob_grad(it, theta);
        const double h = 1e-6;
        for (int t = 0; t < it.n_natural(); ++t) {
          ItemParams up = it, dn = it;
          if (t == 0) {
            up.slopes[0] += h;
            dn.slopes[0] -= h;
          } else {
            up.intercepts[t - 1] += h;
            dn.intercepts[t - 1] -= h;
          }
          Eigen::VectorXd fd = (item_category_probs(up, theta) - item_category_probs(dn, theta)) / (2 * h);
          CHECK((J.col(t) - fd).cwiseAbs().maxCoeff() < 1e-7);
        }
        CHECK(J.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("spec-level Jacobian matches differences in free parameters") {
  std::mt19937_64 rng(5);
  DataShape poly{{3, 4, 2, 3}};
  DataShape dich{{2, 2, 2, 2}};
  std::vector<ModelSpec> specs = {make_spec(Family::Grm, poly), make_spec(Family::Gpcm, poly),
                                  make_spec(Family::TwoPL, dich), make_spec(Family::Rasch, dich),
                                  make_spec(Family::MdTwoPL, dich, 2)};
  for (const auto& spec : specs) {
    ParameterLayout layout(spec);
    ParameterVector x = fixture::random_params(spec, rng);
    REQUIRE(layout.valid(x));
    Eigen::VectorXd theta(spec.n_dims);
    for (int m = 0; m < spec.n_dims; ++m) theta[m] = 0.7 - 1.1 * m;
    for (int j = 0; j < spec.n_items(); ++j) {
      auto free = item_free_parameters(layout, j);
      Eigen::MatrixXd J = category_prob_grad(spec, x, j, theta);
      REQUIRE(J.cols() == static_cast<Eigen::Index>(free.size()));
      for (std::size_t c = 0; c < free.size(); ++c) {
        const double h = 1e-6;
        ParameterVector up = x, dn = x;
        up[free[c]] += h;
        dn[free[c]] -= h;
        Eigen::VectorXd fd = (category_probs(spec, up, j, theta) - category_probs(spec, dn, j, theta)) / (2 * h);
        CHECK((J.col(static_cast<Eigen::Index>(c)) - fd).cwiseAbs().maxCoeff() < 1e-7);
      }
      CHECK(J.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("two-category graded and partial credit links coincide") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const double a = std::exp(0.5 * z(rng)), b = z(rng), t = 2.0 * z(rng);
    auto p = item_category_probs(item(Link::Graded, a, {b}), at(t));
    auto q = item_category_probs(item(Link::PartialCredit, a, {b}), at(t));
    CHECK((p - q).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(p[1] == Approx(oracle::logistic(a * t + b)).epsilon(1e-12));
  }
}

TEST_CASE("probabilities sum to one and the top category rises with theta") {
  std::mt19937_64 rng(9);
  for (Link link : {Link::Graded, Link::PartialCredit}) {
    ItemParams it = item(link, 1.3, {1.2, 0.1, -0.4, -2.0});
    double prev_top = -1.0, prev_bottom = 2.0;
    for (double t = -6.0; t <= 6.0; t += 0.25) {
      auto p = item_category_probs(it, at(t));
      CHECK(std::abs(p.sum() - 1.0) < 1e-12);
      CHECK((p.array() >= 0.0).all());
      CHECK(p[4] > prev_top);
      CHECK(p[0] < prev_bottom);
      prev_top = p[4];
      prev_bottom = p[0];
    }
  }
}

TEST_CASE("unordered graded thresholds are rejected") {
  CHECK_THROWS_AS(item_category_probs(item(Link::Graded, 1.0, {-1.0, 1.0}), at(0.0)), ParameterError);
  CHECK_FALSE(item_params_valid(item(Link::Graded, 1.0, {-1.0, 1.0})));
  CHECK(item_params_valid(item(Link::PartialCredit, 1.0, {-1.0, 1.0})));
}

TEST_CASE("default specs have the expected structure") {
  DataShape shape{{2, 2, 2, 2, 2}};
  ModelSpec rasch = make_spec(Family::Rasch, shape);
  ParameterLayout lr(rasch);
  CHECK(lr.size() == 6);
  CHECK(lr.variance_index() == 5);

  ModelSpec md = make_spec(Family::MdTwoPL, shape, 2);
  ParameterLayout lm(md);
  CHECK(lm.size() == 5 * 2 + 5 - 1);
  CHECK(md.slopes[4][1].kind == SlopeConstraint::Kind::Fixed);

  ModelSpec two = make_spec(Family::TwoPL, shape);
  std::vector<int> items{0, 1, 2};
  set_slope(two, items, 0, SlopeConstraint::equal(0));
  CHECK(ParameterLayout(two).size() == 5 + 1 + 2);
}

TEST_CASE("pack and unpack are inverse") {
  std::mt19937_64 rng(4);
  DataShape shape{{3, 3, 4}};
  for (Family f : {Family::Grm, Family::Gpcm}) {
    ModelSpec spec = make_spec(f, shape);
    ParameterLayout layout(spec);
    ParameterVector x = fixture::random_params(spec, rng);
    CHECK((layout.pack(layout.unpack(x)) - x).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("invalid specs are refused") {
  DataShape shape{{2, 2}};
  ModelSpec spec = make_spec(Family::TwoPL, shape);
  spec.links.pop_back();
  CHECK_THROWS_AS(spec.validate(), SpecError);
  CHECK_THROWS_AS(family_from_string("nonsense"), Error);
  ModelSpec three = make_spec(Family::ThreePLFixedG, shape, 1, 0.2);
  CHECK_THROWS_AS(three.validate_fittable(), SpecError);
}
