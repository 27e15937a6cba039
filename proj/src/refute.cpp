#include "ocml/refute.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ocml/errors.hpp"
#include "ocml/rng.hpp"
#include "ocml/runtime.hpp"

namespace ocml {

namespace {

void check_runs(int n_runs) {
  if (n_runs < 1) throw ConfigError("n_runs must be >= 1");
}

std::uint64_t run_seed(std::uint64_t seed, std::uint64_t test, int run) {
  return derive_seed(seed, {test, static_cast<std::uint64_t>(run)});
}

EffectEstimate original_or_fresh(const Dataset& data, const DmlSpec& spec, Executor& exec,
                                 const EffectEstimate* original) {
  if (original) return *original;
  return estimate(data, spec, exec);
}

// Replications run inside pool tasks, so the nested estimate is sequential.
RefutationRun run_estimate(const Dataset& data, const DmlSpec& spec) {
  Executor inline_exec(1);
  const auto est = estimate(data, spec, inline_exec);
  return {est.ate, est.ate_se, data.n(), data.d()};
}

std::vector<RefutationRun> run_all(Executor& exec, int n_runs, const std::function<RefutationRun(int)>& make) {
  std::vector<std::function<RefutationRun()>> tasks;
  for (int r = 0; r < n_runs; ++r) tasks.emplace_back([&make, r] { return make(r); });
  return exec.submit_all(tasks);
}

void fill_means(RefutationReport& rep) {
  double sa = 0.0, ss = 0.0;
  for (const auto& r : rep.detail) {
    sa += r.ate;
    ss += r.se;
  }
  rep.n_runs = static_cast<int>(rep.detail.size());
  rep.refuted_ate = sa / rep.n_runs;
  rep.refuted_se = ss / rep.n_runs;
}

}  // namespace

RefutationReport placebo_treatment(const Dataset& data, const DmlSpec& spec, Executor& exec, int n_runs,
                                   std::uint64_t seed, const RefuteThresholds& th, const EffectEstimate* original) {
  check_runs(n_runs);
  RefutationReport rep;
  rep.test_name = "placebo_treatment";
  rep.original_ate = original_or_fresh(data, spec, exec, original).ate;
  rep.detail = run_all(exec, n_runs, [&](int r) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(data.n()));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    Rng rng(run_seed(seed, 0x706c6163ULL, r));
    std::shuffle(perm.begin(), perm.end(), rng);
    return run_estimate(data.with_treatment(data.t()(perm)), spec);
  });
  fill_means(rep);
  rep.passed = std::abs(rep.refuted_ate) <= th.se_multiplier * rep.refuted_se;
  return rep;
}

RefutationReport random_common_cause(const Dataset& data, const DmlSpec& spec, Executor& exec, int n_runs,
                                     std::uint64_t seed, const RefuteThresholds& th, const EffectEstimate* original) {
  check_runs(n_runs);
  RefutationReport rep;
  rep.test_name = "random_common_cause";
  rep.original_ate = original_or_fresh(data, spec, exec, original).ate;
  rep.detail = run_all(exec, n_runs, [&](int r) {
    Rng rng(run_seed(seed, 0x72636175ULL, r));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector extra(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) extra[i] = normal(rng);
    return run_estimate(data.with_extra_column(extra, "__random_cause"), spec);
  });
  fill_means(rep);
  const double band = std::max(th.max_rel_drift * std::abs(rep.original_ate), th.se_multiplier * rep.refuted_se);
  rep.passed = std::abs(rep.refuted_ate - rep.original_ate) <= band;
  return rep;
}

RefutationReport subset_refuter(const Dataset& data, const DmlSpec& spec, Executor& exec, double frac, int n_runs,
                                std::uint64_t seed, const RefuteThresholds& th, const EffectEstimate* original) {
  check_runs(n_runs);
  if (!(frac > 0.0 && frac <= 1.0)) throw ConfigError("subset fraction must be in (0, 1]");
  const auto m = static_cast<Eigen::Index>(std::ceil(frac * static_cast<double>(data.n())));
  RefutationReport rep;
  rep.test_name = "subset";
  rep.original_ate = original_or_fresh(data, spec, exec, original).ate;
  rep.detail = run_all(exec, n_runs, [&](int r) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(data.n()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    if (m < data.n()) {
      Rng rng(run_seed(seed, 0x73756273ULL, r));
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(static_cast<std::size_t>(m));
      std::sort(rows.begin(), rows.end());
    }
    return run_estimate(data.rows(rows), spec);
  });
  fill_means(rep);
  double ss = 0.0;
  for (const auto& r : rep.detail) ss += (r.ate - rep.refuted_ate) * (r.ate - rep.refuted_ate);
  const double sd = rep.n_runs > 1 ? std::sqrt(ss / (rep.n_runs - 1)) : 0.0;
  rep.refuted_se = sd;
  rep.passed = std::abs(rep.original_ate - rep.refuted_ate) <= th.sd_multiplier * sd ||
               rep.original_ate == rep.refuted_ate;
  return rep;
}

OverlapReport overlap_diagnostic(const NuisancePredictions& nuis, double eta) {
  if (!(eta >= 0.0 && eta < 0.5)) throw ConfigError("eta must be in [0, 0.5)");
  if (nuis.t_hat.size() == 0) throw DataError("no propensities");
  OverlapReport rep{nuis.t_hat.minCoeff(), nuis.t_hat.maxCoeff(), 0.0, eta};
  Eigen::Index flagged = 0;
  for (Eigen::Index i = 0; i < nuis.t_hat.size(); ++i)
    flagged += (nuis.t_hat[i] <= eta || nuis.t_hat[i] >= 1.0 - eta) ? 1 : 0;
  rep.frac_flagged = static_cast<double>(flagged) / static_cast<double>(nuis.t_hat.size());
  return rep;
}

}  // namespace ocml
