#pragma once

#include <cstdint>
#include <vector>

#include "ocml/data.hpp"
#include "ocml/learners.hpp"

namespace ocml {

class Executor;

struct FoldPlan {
  int k = 0;
  std::vector<int> assignment;  // fold id of each row
  std::uint64_t seed = 0;

  Eigen::Index n() const { return static_cast<Eigen::Index>(assignment.size()); }
  std::vector<Eigen::Index> rows_in(int fold) const;
  std::vector<Eigen::Index> rows_out(int fold) const;
};

// Seeded shuffle of [0, n) dealt round-robin into k folds.
FoldPlan make_folds(Eigen::Index n, int k, std::uint64_t seed);

struct NuisancePredictions {
  Vector y_hat;  // out-of-fold E[Y|X]
  Vector t_hat;  // out-of-fold E[T|X]; the propensity for binary treatment
  FoldPlan fold_plan;
  std::vector<double> y_fold_mse;  // held-out loss of model_y per fold
  std::vector<double> t_fold_mse;  // held-out loss (Brier when binary) of model_t per fold
};

enum class NuisanceRole : std::uint64_t { outcome = 0, treatment = 1 };

// Seed of the learner fitted for (fold, role).
std::uint64_t fold_seed(std::uint64_t seed, int fold, NuisanceRole role);

// Held-out predictions of one nuisance model for one fold.
struct FoldPrediction {
  std::vector<Eigen::Index> rows;
  Vector values;
};

FoldPrediction fit_predict_fold(const Matrix& x, const Vector& target, const LearnerSpec& spec,
                                const FoldPlan& plan, int fold, std::uint64_t seed);

// Issues 2k tasks (model_y and model_t per fold) on `exec` and assembles the
// results by row index.
NuisancePredictions crossfit_predict(const Dataset& data, const LearnerSpec& y_spec, const LearnerSpec& t_spec,
                                     const FoldPlan& plan, Executor& exec);

}  // namespace ocml
