#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ocml/data.hpp"

namespace ocml {

class Executor;

enum class LearnerKind { ridge, logistic, random_forest_reg, random_forest_clf };

struct HyperParams {
  double ridge_lambda = 1e-3;
  double logistic_l2 = 1e-3;
  int logistic_max_iter = 100;
  int n_trees = 100;
  int max_depth = 8;  // 0 grows a single root leaf
  int min_leaf = 5;
  double max_features = 1.0 / 3.0;
  std::uint64_t bootstrap_seed = 0;

  bool operator==(const HyperParams&) const = default;
};

struct LearnerSpec {
  LearnerKind kind = LearnerKind::ridge;
  HyperParams params;

  bool is_classifier() const { return kind == LearnerKind::logistic || kind == LearnerKind::random_forest_clf; }
  void validate() const;
  bool operator==(const LearnerSpec&) const = default;
};

struct LinearModel {
  double intercept = 0.0;
  Vector coef;
  bool logistic = false;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(const double* row, Eigen::Index stride) const;
};

struct ForestModel {
  std::vector<Tree> trees;
};

class FittedModel {
 public:
  FittedModel(LearnerKind kind, Eigen::Index d_in, std::variant<LinearModel, ForestModel> state)
      : kind_(kind), d_in_(d_in), state_(std::move(state)) {}

  LearnerKind kind() const { return kind_; }
  Eigen::Index d_in() const { return d_in_; }
  const LinearModel& linear() const;
  const ForestModel& forest() const;

 private:
  LearnerKind kind_;
  Eigen::Index d_in_;
  std::variant<LinearModel, ForestModel> state_;
};

// Deterministic given seed. Trees of a forest are trained as tasks on `exec`
// when one is given; the fitted model is the same for any worker count.
FittedModel fit(const LearnerSpec& spec, const Matrix& x, const Vector& target, std::uint64_t seed,
                Executor* exec = nullptr);

Vector predict(const FittedModel& model, const Matrix& x);

// Pooled out-of-fold squared error: MSE for regressors, Brier score for
// classifiers.
double cv_score(const LearnerSpec& spec, const Matrix& x, const Vector& target, int k, std::uint64_t seed);

struct FoldLoss {
  double sum_sq = 0.0;
  Eigen::Index count = 0;
};

// Fits on every row outside `fold` and scores the rows inside it.
FoldLoss fold_loss(const LearnerSpec& spec, const Matrix& x, const Vector& target,
                   const std::vector<int>& assignment, int fold, std::uint64_t seed);

// Penalized objectives, exposed for optimality and gradient checks.
// beta = (intercept, w...). Logistic: sum of log-losses + l2/2 |w|^2.
double logistic_objective(const Vector& beta, const Matrix& x, const Vector& y, double l2);
Vector logistic_gradient(const Vector& beta, const Matrix& x, const Vector& y, double l2);
// Ridge: |y - b0 - x w|^2 + lambda |w|^2.
double ridge_objective(const Vector& beta, const Matrix& x, const Vector& y, double lambda);

std::string to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(const std::string& s);

nlohmann::json model_to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const LearnerSpec& spec);
LearnerSpec spec_from_json(const nlohmann::json& j);

}  // namespace ocml
