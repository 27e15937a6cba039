#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "ocml/errors.hpp"
#include "ocml/learners.hpp"

using namespace ocml;

namespace {

LearnerSpec ridge(double lambda) {
  LearnerSpec s{LearnerKind::ridge, {}};
  s.params.ridge_lambda = lambda;
  return s;
}

LearnerSpec logistic(double l2) {
  LearnerSpec s{LearnerKind::logistic, {}};
  s.params.logistic_l2 = l2;
  return s;
}

LearnerSpec forest(LearnerKind kind, int trees, int depth) {
  LearnerSpec s{kind, {}};
  s.params.n_trees = trees;
  s.params.max_depth = depth;
  return s;
}

Matrix random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = nd(rng);
  return m;
}

oracle::Mat to_rows(const Matrix& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()), oracle::Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

oracle::Vec to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("ridge without penalty recovers an exact line") {
  Matrix x(3, 1);
  x << 1, 2, 3;
  Vector y(3);
  y << 2, 4, 6;
  const auto m = fit(ridge(0.0), x, y, 0);
  CHECK(m.linear().coef[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::abs(m.linear().intercept) < 1e-12);
  CHECK((predict(m, x) - y).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("ridge matches the normal equations") {
  SUBCASE("hand-sized system, lambda = 1") {
    // [[3, 6], [6, 15]] b = [12, 28]  =>  b = (4/3, 4/3)
    Matrix x(3, 1);
    x << 1, 2, 3;
    Vector y(3);
    y << 2, 4, 6;
    const auto ref = oracle::ridge_normal_equations(to_rows(x), to_vec(y), 1.0);
    CHECK(ref[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    CHECK(ref[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    const auto m = fit(ridge(1.0), x, y, 0);
    CHECK(std::abs(m.linear().intercept - ref[0]) <= 1e-10);
    CHECK(std::abs(m.linear().coef[0] - ref[1]) <= 1e-10);
  }
  SUBCASE("random designs") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Matrix x = random_matrix(60, 4, seed);
      const Vector y = random_matrix(60, 1, seed + 100).col(0) + x.col(1) * 3.0;
      const double lambda = 0.5 * static_cast<double>(seed);
      const auto ref = oracle::ridge_normal_equations(to_rows(x), to_vec(y), lambda);
      const auto m = fit(ridge(lambda), x, y, 0);
      CHECK(std::abs(m.linear().intercept - ref[0]) <= 1e-10);
      for (Eigen::Index j = 0; j < 4; ++j) CHECK(std::abs(m.linear().coef[j] - ref[static_cast<std::size_t>(j) + 1]) <= 1e-10);
    }
  }
}

TEST_CASE("ridge solution is a minimum of the penalized objective") {
  const Matrix x = random_matrix(80, 3, 7);
  const Vector y = x * Vector::LinSpaced(3, 1, 3) + random_matrix(80, 1, 8).col(0);
  const double lambda = 2.0;
  const auto m = fit(ridge(lambda), x, y, 0);
  Vector beta(4);
  beta << m.linear().intercept, m.linear().coef;
  const double best = ridge_objective(beta, x, y, lambda);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 1e-3);
  for (int trial = 0; trial < 50; ++trial) {
    Vector delta(4);
    for (auto& v : delta) v = nd(rng);
    CHECK(ridge_objective(beta + delta, x, y, lambda) > best);
  }
}

TEST_CASE("ridge coefficients shrink to zero as the penalty grows") {
  const Matrix x = random_matrix(100, 2, 3);
  const Vector y = x.col(0) * 2.0 - x.col(1);
  double prev = fit(ridge(0.0), x, y, 0).linear().coef.norm();
  for (double lambda : {1.0, 1e2, 1e4, 1e6, 1e9}) {
    const double norm = fit(ridge(lambda), x, y, 0).linear().coef.norm();
    CHECK(norm < prev);
    prev = norm;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("ridge cv error varies continuously in lambda") {
  const Matrix x = random_matrix(120, 3, 4);
  const Vector y = x * Vector::LinSpaced(3, 1, 2) + 0.3 * random_matrix(120, 1, 5).col(0);
  const double a = cv_score(ridge(1.0), x, y, 5, 9);
  const double b = cv_score(ridge(1.0 + 1e-6), x, y, 5, 9);
  CHECK(std::abs(a - b) < 1e-6);
}

TEST_CASE("logistic on uninformative zeros predicts one half") {
  Matrix x = Matrix::Zero(10, 2);
  Vector y(10);
  y << 0, 1, 0, 1, 0, 1, 0, 1, 0, 1;
  const auto m = fit(logistic(1e-3), x, y, 0);
  CHECK(std::abs(m.linear().intercept) < 1e-10);
  CHECK((predict(m, x).array() - 0.5).abs().maxCoeff() < 1e-10);
}

TEST_CASE("logistic gradient matches finite differences") {
  const Matrix x = random_matrix(50, 3, 21);
  Vector y(50);
  std::mt19937_64 rng(2);
  for (auto& v : y) v = std::bernoulli_distribution(0.4)(rng) ? 1.0 : 0.0;
  const double l2 = 0.7;
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    Vector beta(4);
    for (auto& v : beta) v = nd(rng);
    const auto rows = to_rows(x);
    const auto yy = to_vec(y);
    const auto num = oracle::fd_gradient([&](const oracle::Vec& b) { return oracle::logistic_nll(b, rows, yy, l2); },
                                         to_vec(beta), 1e-5);
    const Vector g = logistic_gradient(beta, x, y, l2);
    CHECK(logistic_objective(beta, x, y, l2) == doctest::Approx(oracle::logistic_nll(to_vec(beta), rows, yy, l2)));
    for (std::size_t i = 0; i < num.size(); ++i) {
      const double rel = std::abs(g[static_cast<Eigen::Index>(i)] - num[i]) / std::max(1.0, std::abs(num[i]));
      CHECK(rel <= 1e-5);
    }
  }
}

TEST_CASE("logistic converges to a stationary point") {
  const Matrix x = random_matrix(400, 2, 31);
  Vector y(400);
  std::mt19937_64 rng(3);
  for (Eigen::Index i = 0; i < 400; ++i)
    y[i] = std::bernoulli_distribution(expit(0.5 + x(i, 0) - 2 * x(i, 1)))(rng) ? 1.0 : 0.0;
  const auto m = fit(logistic(1e-3), x, y, 0);
  Vector beta(3);
  beta << m.linear().intercept, m.linear().coef;
  CHECK(logistic_gradient(beta, x, y, 1e-3).norm() <= 1e-8);
}

TEST_CASE("logistic under separation stays finite") {
  Matrix x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  Vector y(6);
  y << 0, 0, 0, 1, 1, 1;
  const auto m = fit(logistic(1e-3), x, y, 0);
  CHECK(m.linear().coef.allFinite());
  const Vector p = predict(m, x);
  CHECK(p[0] < 0.01);
  CHECK(p[5] > 0.99);

  const auto c = fit(logistic(1e-3), x, Vector::Ones(6), 0);
  CHECK(c.linear().coef.allFinite());
  CHECK(std::isfinite(c.linear().intercept));
}

TEST_CASE("single depth-0 tree predicts the training mean") {
  const Matrix x = random_matrix(37, 2, 5);
  const Vector y = random_matrix(37, 1, 6).col(0);
  const auto m = fit(forest(LearnerKind::random_forest_reg, 1, 0), x, y, 4);
  const Vector p = predict(m, random_matrix(10, 2, 7));
  CHECK((p.array() - y.mean()).abs().maxCoeff() < 1e-12);
}

TEST_CASE("classifier probabilities stay in [0, 1]") {
  const Matrix x = random_matrix(300, 3, 9);
  Vector y(300);
  for (Eigen::Index i = 0; i < 300; ++i) y[i] = x(i, 0) + 0.3 * x(i, 2) > 0 ? 1.0 : 0.0;
  const Matrix probe = 5.0 * random_matrix(500, 3, 10);
  for (const auto& spec : {forest(LearnerKind::random_forest_clf, 20, 6), logistic(1e-3)}) {
    const Vector p = predict(fit(spec, x, y, 1), probe);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(p.maxCoeff() <= 1.0);
  }
}

TEST_CASE("forest learns a step function out of sample") {
  // y = 1{x0 > 0.3} plus irrelevant features; accuracy is judged on fresh draws.
  const Matrix x = random_matrix(200, 3, 12);
  Vector y(200);
  for (Eigen::Index i = 0; i < 200; ++i) y[i] = x(i, 0) > 0.3 ? 1.0 : 0.0;
  const Matrix xt = random_matrix(1000, 3, 13);
  for (auto kind : {LearnerKind::random_forest_reg, LearnerKind::random_forest_clf}) {
    const Vector p = predict(fit(forest(kind, 50, 8), x, y, 3), xt);
    int correct = 0;
    for (Eigen::Index i = 0; i < 1000; ++i) correct += ((p[i] > 0.5) == (xt(i, 0) > 0.3)) ? 1 : 0;
    CHECK(correct > 900);
  }
}

TEST_CASE("forests are deterministic and ignore training row order") {
  const Matrix x = random_matrix(250, 4, 14);
  const Vector y = x.col(0).array().sin() + x.col(1).array();
  const auto spec = forest(LearnerKind::random_forest_reg, 15, 6);
  const auto a = fit(spec, x, y, 77);
  const auto b = fit(spec, x, y, 77);
  CHECK(model_to_json(a) == model_to_json(b));
  CHECK(model_to_json(a) != model_to_json(fit(spec, x, y, 78)));

  std::vector<Eigen::Index> perm(250);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
  const auto c = fit(spec, x(perm, Eigen::all), y(perm), 77);
  const Matrix probe = random_matrix(100, 4, 15);
  CHECK(predict(a, probe) == predict(c, probe));
}

TEST_CASE("split ties go to the lowest feature index") {
  Matrix x(40, 2);
  Vector y(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    x(i, 0) = x(i, 1) = static_cast<double>(i);
    y[i] = i < 20 ? 0.0 : 1.0;
  }
  auto spec = forest(LearnerKind::random_forest_reg, 5, 1);
  spec.params.max_features = 1.0;
  const auto m = fit(spec, x, y, 1);
  for (const auto& tree : m.forest().trees) CHECK(tree.nodes[0].feature == 0);
}

TEST_CASE("predict rejects a width mismatch") {
  const Matrix x = random_matrix(30, 3, 1);
  const Vector y = x.col(0);
  for (const auto& spec : {ridge(1e-3), forest(LearnerKind::random_forest_reg, 2, 2)}) {
    const auto m = fit(spec, x, y, 0);
    CHECK_THROWS_AS(predict(m, random_matrix(5, 2, 2)), DataError);
  }
}

TEST_CASE("fit rejects bad inputs") {
  const Matrix x = random_matrix(10, 2, 1);
  CHECK_THROWS_AS(fit(ridge(0.1), x, Vector::Zero(9), 0), DataError);
  CHECK_THROWS_AS(fit(logistic(0.1), x, Vector::Constant(10, 0.5), 0), DataError);
  auto bad = ridge(-1.0);
  CHECK_THROWS_AS(fit(bad, x, Vector::Zero(10), 0), ConfigError);
  auto bad_forest = forest(LearnerKind::random_forest_reg, 0, 3);
  CHECK_THROWS_AS(fit(bad_forest, x, Vector::Zero(10), 0), ConfigError);
}

TEST_CASE("cv score") {
  const Matrix x = random_matrix(100, 2, 40);
  const Vector y = 3.0 * x.col(0) - x.col(1);

  SUBCASE("exact model class on noiseless data") { CHECK(cv_score(ridge(0.0), x, y, 5, 1) <= 1e-10); }
  SUBCASE("constant target") { CHECK(cv_score(ridge(0.0), x, Vector::Constant(100, 4.0), 4, 1) <= 1e-20); }
  SUBCASE("weak penalty beats a huge one on informative data") {
    CHECK(cv_score(ridge(0.0), x, y, 5, 2) < cv_score(ridge(1e6), x, y, 5, 2));
  }
  SUBCASE("fold count out of range") {
    CHECK_THROWS_AS(cv_score(ridge(0.0), x, y, 1, 0), ConfigError);
    CHECK_THROWS_AS(cv_score(ridge(0.0), x, y, 101, 0), ConfigError);
  }
  SUBCASE("deterministic") { CHECK(cv_score(ridge(0.1), x, y, 3, 5) == cv_score(ridge(0.1), x, y, 3, 5)); }
}

TEST_CASE("model blobs round-trip") {
  const Matrix x = random_matrix(80, 3, 50);
  Vector y(80);
  for (Eigen::Index i = 0; i < 80; ++i) y[i] = x(i, 0) > 0 ? 1.0 : 0.0;
  const Matrix probe = random_matrix(20, 3, 51);
  for (const auto& spec : {ridge(0.1), logistic(0.1), forest(LearnerKind::random_forest_clf, 4, 3)}) {
    const auto m = fit(spec, x, y, 1);
    const auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
    CHECK(back.kind() == m.kind());
    CHECK(predict(back, probe) == predict(m, probe));
  }
  CHECK_THROWS_AS(model_from_json(nlohmann::json{{"format", "other"}}), ConfigError);
}
