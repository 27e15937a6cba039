#include "ocml/crossfit.hpp"

#include <algorithm>
#include <numeric>

#include "ocml/errors.hpp"
#include "ocml/rng.hpp"
#include "ocml/runtime.hpp"

namespace ocml {

std::vector<Eigen::Index> FoldPlan::rows_in(int fold) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == fold) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

std::vector<Eigen::Index> FoldPlan::rows_out(int fold) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] != fold) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

FoldPlan make_folds(Eigen::Index n, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<Eigen::Index>(k) > n)
    throw ConfigError("fold count " + std::to_string(k) + " out of range [2, " + std::to_string(n) + "]");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Rng rng(derive_seed(seed, {0x666f6c64ULL}));
  std::shuffle(perm.begin(), perm.end(), rng);
  FoldPlan plan{k, std::vector<int>(static_cast<std::size_t>(n)), seed};
  for (std::size_t r = 0; r < perm.size(); ++r)
    plan.assignment[static_cast<std::size_t>(perm[r])] = static_cast<int>(r % static_cast<std::size_t>(k));
  return plan;
}

std::uint64_t fold_seed(std::uint64_t seed, int fold, NuisanceRole role) {
  return derive_seed(seed, {static_cast<std::uint64_t>(fold), static_cast<std::uint64_t>(role)});
}

FoldPrediction fit_predict_fold(const Matrix& x, const Vector& target, const LearnerSpec& spec,
                                const FoldPlan& plan, int fold, std::uint64_t seed) {
  const auto train = plan.rows_out(fold);
  auto held = plan.rows_in(fold);
  const Matrix xt = x(train, Eigen::all);
  const Vector yt = target(train);
  const auto model = fit(spec, xt, yt, seed);
  Vector values = predict(model, x(held, Eigen::all));
  return {std::move(held), std::move(values)};
}

NuisancePredictions crossfit_predict(const Dataset& data, const LearnerSpec& y_spec, const LearnerSpec& t_spec,
                                     const FoldPlan& plan, Executor& exec) {
  if (plan.n() != data.n())
    throw ConfigError("fold plan covers " + std::to_string(plan.n()) + " rows, dataset has " +
                      std::to_string(data.n()));
  if (y_spec.is_classifier()) throw ConfigError("model_y must be a regressor");
  if (t_spec.is_classifier() != data.discrete_treatment())
    throw ConfigError(data.discrete_treatment() ? "binary treatment needs a classifier for model_t"
                                                : "continuous treatment needs a regressor for model_t");

  if (data.discrete_treatment()) {
    for (int f = 0; f < plan.k; ++f) {
      bool seen0 = false, seen1 = false;
      for (std::size_t i = 0; i < plan.assignment.size(); ++i) {
        if (plan.assignment[i] == f) continue;
        (data.t()[static_cast<Eigen::Index>(i)] == 1.0 ? seen1 : seen0) = true;
      }
      if (!seen0 || !seen1) throw EstimationError("fold without treatment variation: fold " + std::to_string(f));
    }
  }

  const Matrix& x = data.x();
  std::vector<std::function<FoldPrediction()>> tasks;
  tasks.reserve(static_cast<std::size_t>(2 * plan.k));
  for (int f = 0; f < plan.k; ++f) {
    tasks.emplace_back([&, f] {
      return fit_predict_fold(x, data.y(), y_spec, plan, f, fold_seed(plan.seed, f, NuisanceRole::outcome));
    });
    tasks.emplace_back([&, f] {
      return fit_predict_fold(x, data.t(), t_spec, plan, f, fold_seed(plan.seed, f, NuisanceRole::treatment));
    });
  }
  const auto results = exec.submit_all(tasks);

  NuisancePredictions out{Vector(data.n()), Vector(data.n()), plan, {}, {}};
  for (int f = 0; f < plan.k; ++f) {
    const auto& ry = results[static_cast<std::size_t>(2 * f)];
    const auto& rt = results[static_cast<std::size_t>(2 * f + 1)];
    double sy = 0.0, st = 0.0;
    for (std::size_t i = 0; i < ry.rows.size(); ++i) {
      const auto row = ry.rows[i];
      out.y_hat[row] = ry.values[static_cast<Eigen::Index>(i)];
      out.t_hat[row] = rt.values[static_cast<Eigen::Index>(i)];
      sy += (data.y()[row] - out.y_hat[row]) * (data.y()[row] - out.y_hat[row]);
      st += (data.t()[row] - out.t_hat[row]) * (data.t()[row] - out.t_hat[row]);
    }
    const auto m = static_cast<double>(std::max<std::size_t>(ry.rows.size(), 1));
    out.y_fold_mse.push_back(sy / m);
    out.t_fold_mse.push_back(st / m);
  }
  return out;
}

}  // namespace ocml
