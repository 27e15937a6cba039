#pragma once

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "ocml/learners.hpp"

namespace ocml {

class Executor;

struct ParamGrid {
  std::vector<LearnerSpec> candidates;
  int cv_k = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TuneResult {
  LearnerSpec best;
  std::vector<std::pair<LearnerSpec, double>> scores;  // ascending by score, stable in candidate order
  std::size_t best_index = 0;
  double wall_seconds = 0.0;
};

// Seed of the fit for (candidate, fold).
std::uint64_t tune_seed(std::uint64_t seed, std::size_t candidate, int fold);

// One task per (candidate, fold); per-candidate score is the pooled
// out-of-fold squared error (MSE or Brier).
TuneResult grid_search(const Matrix& x, const Vector& target, const ParamGrid& grid, Executor& exec);

using NuisanceSpec = std::variant<LearnerSpec, ParamGrid>;

// A plain spec passes through; a grid is searched on the given data.
LearnerSpec resolve_tuned(const NuisanceSpec& spec, const Matrix& x, const Vector& target, Executor& exec);

bool is_classifier(const NuisanceSpec& spec);

}  // namespace ocml
