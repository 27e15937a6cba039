#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ocml/dml.hpp"

namespace ocml {

class Executor;

struct RefuteThresholds {
  double se_multiplier = 2.0;   // placebo and random-cause SE band
  double max_rel_drift = 0.05;  // random-cause relative drift
  double sd_multiplier = 2.0;   // subset spread band
};

struct RefutationRun {
  double ate = 0.0;
  double se = 0.0;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
};

struct RefutationReport {
  std::string test_name;
  double original_ate = 0.0;
  double refuted_ate = 0.0;  // mean over runs
  double refuted_se = 0.0;   // mean per-run SE (subset: SD of run estimates)
  int n_runs = 0;
  bool passed = false;
  std::vector<RefutationRun> detail;
};

struct OverlapReport {
  double p_min = 0.0;
  double p_max = 0.0;
  double frac_flagged = 0.0;
  double eta = 0.0;
};

// Each refuter runs its replications as tasks on `exec`. When `original` is
// null the unperturbed estimate is computed first.

// Treatment replaced by a seeded permutation; passes when the mean refuted
// ATE lies within se_multiplier * refuted_se of zero.
RefutationReport placebo_treatment(const Dataset& data, const DmlSpec& spec, Executor& exec, int n_runs,
                                   std::uint64_t seed, const RefuteThresholds& th = {},
                                   const EffectEstimate* original = nullptr);

// Appends an independent N(0,1) covariate; passes when
// |refuted - original| <= max(max_rel_drift * |original|, se_multiplier * refuted_se).
RefutationReport random_common_cause(const Dataset& data, const DmlSpec& spec, Executor& exec, int n_runs,
                                     std::uint64_t seed, const RefuteThresholds& th = {},
                                     const EffectEstimate* original = nullptr);

// Re-estimates on subsamples of ceil(frac * n) rows; passes when the original
// ATE lies within sd_multiplier standard deviations of the subsample ATEs.
RefutationReport subset_refuter(const Dataset& data, const DmlSpec& spec, Executor& exec, double frac, int n_runs,
                                std::uint64_t seed, const RefuteThresholds& th = {},
                                const EffectEstimate* original = nullptr);

// Flags units with p <= eta or p >= 1 - eta.
OverlapReport overlap_diagnostic(const NuisancePredictions& nuis, double eta);

}  // namespace ocml
