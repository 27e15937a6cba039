#include "doctest.h"
#include "ocml/errors.hpp"
#include "ocml/refute.hpp"
#include "ocml/runtime.hpp"

using namespace ocml;

namespace {

DmlSpec linear_spec(std::uint64_t seed) {
  DmlSpec spec;
  LearnerSpec y{LearnerKind::ridge, {}};
  y.params.ridge_lambda = 0.0;
  spec.y_model = y;
  spec.t_model = LearnerSpec{LearnerKind::logistic, {}};
  spec.seed = seed;
  return spec;
}

SyntheticData confounded(std::uint64_t seed, Eigen::Index n = 2000) {
  DgpSpec g;
  g.n = n;
  g.d = 3;
  g.outcome_kind = OutcomeKind::linear;
  g.seed = seed;
  return generate_synthetic(g);
}

}  // namespace

TEST_CASE("placebo treatment removes the effect") {
  const auto s = confounded(1);
  Executor exec(2);
  const auto rep = placebo_treatment(s.data, linear_spec(0), exec, 5, 7);
  CHECK(rep.test_name == "placebo_treatment");
  CHECK(rep.n_runs == 5);
  CHECK(rep.detail.size() == 5);
  CHECK(rep.original_ate == doctest::Approx(1.0).epsilon(0.15));
  CHECK(rep.passed);
  CHECK(std::abs(rep.refuted_ate) <= 2.0 * rep.refuted_se);
}

TEST_CASE("refuters reject a non-positive run count") {
  const auto s = confounded(2, 300);
  Executor exec(1);
  CHECK_THROWS_AS(placebo_treatment(s.data, linear_spec(0), exec, 0, 1), ConfigError);
  CHECK_THROWS_AS(random_common_cause(s.data, linear_spec(0), exec, 0, 1), ConfigError);
  CHECK_THROWS_AS(subset_refuter(s.data, linear_spec(0), exec, 0.5, 0, 1), ConfigError);
}

TEST_CASE("subset fraction bounds") {
  const auto s = confounded(3, 500);
  Executor exec(1);
  const auto spec = linear_spec(4);
  CHECK_THROWS_AS(subset_refuter(s.data, spec, exec, 0.0, 3, 1), ConfigError);
  CHECK_THROWS_AS(subset_refuter(s.data, spec, exec, 1.5, 3, 1), ConfigError);

  // The full sample reproduces the original estimate exactly.
  const auto full = subset_refuter(s.data, spec, exec, 1.0, 3, 1);
  for (const auto& r : full.detail) CHECK(r.ate == full.original_ate);
  CHECK(full.passed);

  const auto half = subset_refuter(s.data, spec, exec, 0.5, 4, 1);
  for (const auto& r : half.detail) CHECK(r.n == 250);
  CHECK(half.refuted_se > 0.0);
}

TEST_CASE("random common cause widens the covariates by one") {
  const auto s = confounded(4);
  Executor exec(1);
  const auto rep = random_common_cause(s.data, linear_spec(1), exec, 3, 9);
  for (const auto& r : rep.detail) CHECK(r.d == s.data.d() + 1);
  CHECK(rep.passed);
  CHECK(std::abs(rep.refuted_ate - rep.original_ate) <= 0.05 * std::abs(rep.original_ate));
}

TEST_CASE("a supplied original estimate is reused") {
  const auto s = confounded(5, 800);
  Executor exec(1);
  EffectEstimate fake;
  fake.ate = 123.0;
  const auto rep = random_common_cause(s.data, linear_spec(1), exec, 2, 9, {}, &fake);
  CHECK(rep.original_ate == 123.0);
  CHECK_FALSE(rep.passed);
}

TEST_CASE("refutations are reproducible and ignore the worker count") {
  const auto s = confounded(6, 1000);
  Executor one(1), four(4);
  const auto spec = linear_spec(2);
  const auto a = placebo_treatment(s.data, spec, one, 4, 3);
  const auto b = placebo_treatment(s.data, spec, four, 4, 3);
  REQUIRE(a.detail.size() == b.detail.size());
  for (std::size_t i = 0; i < a.detail.size(); ++i) {
    CHECK(a.detail[i].ate == b.detail[i].ate);
    CHECK(a.detail[i].se == b.detail[i].se);
  }
  CHECK(subset_refuter(s.data, spec, one, 0.6, 3, 8).refuted_ate ==
        subset_refuter(s.data, spec, four, 0.6, 3, 8).refuted_ate);
}

TEST_CASE("overlap diagnostic") {
  NuisancePredictions nuis;
  SUBCASE("fair coin") {
    nuis.t_hat = Vector::Constant(100, 0.5);
    const auto rep = overlap_diagnostic(nuis, 0.01);
    CHECK(rep.frac_flagged == 0.0);
    CHECK(rep.p_min == 0.5);
    CHECK(rep.p_max == 0.5);
  }
  SUBCASE("exact zeros and ones count at eta = 0") {
    nuis.t_hat = Vector(4);
    nuis.t_hat << 0.0, 0.3, 1.0, 0.7;
    CHECK(overlap_diagnostic(nuis, 0.0).frac_flagged == 0.5);
  }
  SUBCASE("strong confounding and monotone in eta") {
    DgpSpec g;
    g.n = 5000;
    g.d = 2;
    g.confounding_strength = 5.0;
    const auto s = generate_synthetic(g);
    nuis.t_hat = s.truth.propensity;
    double prev = -1.0;
    for (double eta : {0.0, 0.001, 0.01, 0.05, 0.1, 0.3, 0.49}) {
      const double f = overlap_diagnostic(nuis, eta).frac_flagged;
      CHECK(f >= prev);
      prev = f;
    }
    CHECK(overlap_diagnostic(nuis, 0.05).frac_flagged > 0.1);
  }
  SUBCASE("eta out of range") {
    nuis.t_hat = Vector::Constant(3, 0.5);
    CHECK_THROWS_AS(overlap_diagnostic(nuis, 0.5), ConfigError);
    CHECK_THROWS_AS(overlap_diagnostic(nuis, -0.1), ConfigError);
  }
}
