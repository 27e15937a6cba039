#include "ocml/tune.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "ocml/crossfit.hpp"
#include "ocml/errors.hpp"
#include "ocml/rng.hpp"
#include "ocml/runtime.hpp"

namespace ocml {

void ParamGrid::validate() const {
  if (candidates.empty()) throw ConfigError("parameter grid has no candidates");
  const bool clf = candidates.front().is_classifier();
  for (const auto& c : candidates) {
    c.validate();
    if (c.is_classifier() != clf) throw ConfigError("parameter grid mixes regressors and classifiers");
  }
  if (cv_k < 2) throw ConfigError("grid cv_k must be >= 2");
}

std::uint64_t tune_seed(std::uint64_t seed, std::size_t candidate, int fold) {
  return derive_seed(seed, {0x74756e65ULL, candidate, static_cast<std::uint64_t>(fold)});
}

TuneResult grid_search(const Matrix& x, const Vector& target, const ParamGrid& grid, Executor& exec) {
  const auto start = std::chrono::steady_clock::now();
  grid.validate();
  const auto plan = make_folds(x.rows(), grid.cv_k, grid.seed);

  std::vector<std::function<FoldLoss()>> tasks;
  tasks.reserve(grid.candidates.size() * static_cast<std::size_t>(grid.cv_k));
  for (std::size_t c = 0; c < grid.candidates.size(); ++c) {
    for (int f = 0; f < grid.cv_k; ++f) {
      tasks.emplace_back([&, c, f] {
        return fold_loss(grid.candidates[c], x, target, plan.assignment, f, tune_seed(grid.seed, c, f));
      });
    }
  }
  const auto losses = exec.submit_all(tasks);

  std::vector<double> score(grid.candidates.size());
  for (std::size_t c = 0; c < grid.candidates.size(); ++c) {
    double total = 0.0;
    Eigen::Index count = 0;
    for (int f = 0; f < grid.cv_k; ++f) {
      const auto& fl = losses[c * static_cast<std::size_t>(grid.cv_k) + static_cast<std::size_t>(f)];
      total += fl.sum_sq;
      count += fl.count;
    }
    score[c] = total / static_cast<double>(count);
  }

  std::vector<std::size_t> order(score.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });

  TuneResult res{grid.candidates[order.front()], {}, order.front(), 0.0};
  for (auto c : order) res.scores.emplace_back(grid.candidates[c], score[c]);
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

LearnerSpec resolve_tuned(const NuisanceSpec& spec, const Matrix& x, const Vector& target, Executor& exec) {
  if (const auto* plain = std::get_if<LearnerSpec>(&spec)) return *plain;
  return grid_search(x, target, std::get<ParamGrid>(spec), exec).best;
}

bool is_classifier(const NuisanceSpec& spec) {
  if (const auto* plain = std::get_if<LearnerSpec>(&spec)) return plain->is_classifier();
  const auto& grid = std::get<ParamGrid>(spec);
  return !grid.candidates.empty() && grid.candidates.front().is_classifier();
}

}  // namespace ocml
