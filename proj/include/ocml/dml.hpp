#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ocml/crossfit.hpp"
#include "ocml/data.hpp"
#include "ocml/tune.hpp"

namespace ocml {

class Executor;

struct DmlSpec {
  NuisanceSpec y_model = LearnerSpec{LearnerKind::random_forest_reg, {}};
  NuisanceSpec t_model = LearnerSpec{LearnerKind::random_forest_clf, {}};
  int k = 5;
  std::uint64_t seed = 0;
  std::optional<std::vector<Eigen::Index>> het_features;  // default: every covariate
  double trim_eta = 0.01;

  void validate(Eigen::Index d) const;
  std::vector<Eigen::Index> het_columns(Eigen::Index d) const;
};

// theta(x) = beta[0] + beta[1:] . x_het
struct CateModel {
  Vector beta;
  Matrix cov;  // HC0 sandwich covariance of beta
  Eigen::Index n_used = 0;
  std::vector<Eigen::Index> het_features;
};

struct NuisanceDiagnostics {
  std::vector<double> y_fold_mse;
  std::vector<double> t_fold_mse;
  double t_hat_min = 0.0;
  double t_hat_max = 0.0;
  double frac_clipped = 0.0;  // share of propensities moved by trimming
};

struct EffectEstimate {
  double ate = 0.0;
  double ate_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  CateModel cate_model;
  NuisanceDiagnostics nuisance_diag;
  LearnerSpec y_learner;  // after tuning
  LearnerSpec t_learner;
};

struct StageTimes {
  double tune_seconds = 0.0;
  double crossfit_seconds = 0.0;
  double final_seconds = 0.0;
};

struct Residuals {
  Vector y_res;
  Vector t_res;
};

Residuals residualize(const Dataset& data, const NuisancePredictions& nuis, double trim_eta);

// OLS of y_res on [t_res, t_res * x_het] without intercept, HC0 covariance.
CateModel fit_final(const Vector& y_res, const Vector& t_res, const Matrix& x_het);

double cate(const CateModel& model, const Vector& x_het_row);

// ATE and its delta-method standard error at the sample mean of x_het.
void summarize_ate(const CateModel& model, const Matrix& x_het, EffectEstimate& out);

// make_folds -> crossfit_predict -> residualize -> fit_final. Grids in the
// spec are resolved on the full sample first. `nuisances` receives the
// cross-fitted predictions when non-null.
EffectEstimate estimate(const Dataset& data, const DmlSpec& spec, Executor& exec, StageTimes* times = nullptr,
                        NuisancePredictions* nuisances = nullptr);

struct PluginEstimate {
  double ate = 0.0;
  double se = 0.0;
  std::size_t strata = 0;
};

// Stratified difference in means over the distinct covariate rows
// (at most 64 strata, both arms present in each).
PluginEstimate plugin_estimate(const Dataset& data);
double plugin_ate(const Dataset& data);

}  // namespace ocml
