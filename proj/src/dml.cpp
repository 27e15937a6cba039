#include "ocml/dml.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "ocml/errors.hpp"
#include "ocml/runtime.hpp"

namespace ocml {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

void DmlSpec::validate(Eigen::Index d) const {
  if (k < 2) throw ConfigError("k must be >= 2");
  if (!(trim_eta >= 0.0 && trim_eta < 0.5)) throw ConfigError("trim_eta must be in [0, 0.5)");
  if (het_features) {
    for (auto j : *het_features)
      if (j < 0 || j >= d) throw ConfigError("het feature index " + std::to_string(j) + " out of range");
  }
}

std::vector<Eigen::Index> DmlSpec::het_columns(Eigen::Index d) const {
  if (het_features) return *het_features;
  std::vector<Eigen::Index> all(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) all[static_cast<std::size_t>(j)] = j;
  return all;
}

Residuals residualize(const Dataset& data, const NuisancePredictions& nuis, double trim_eta) {
  if (nuis.y_hat.size() != data.n() || nuis.t_hat.size() != data.n())
    throw EstimationError("nuisance predictions do not match dataset length");
  Residuals r{data.y() - nuis.y_hat, Vector(data.n())};
  if (data.discrete_treatment()) {
    for (Eigen::Index i = 0; i < data.n(); ++i)
      r.t_res[i] = data.t()[i] - std::clamp(nuis.t_hat[i], trim_eta, 1.0 - trim_eta);
  } else {
    r.t_res = data.t() - nuis.t_hat;
  }
  return r;
}

CateModel fit_final(const Vector& y_res, const Vector& t_res, const Matrix& x_het) {
  const Eigen::Index n = y_res.size();
  if (t_res.size() != n || x_het.rows() != n) throw EstimationError("final stage: length mismatch");
  const Eigen::Index p = 1 + x_het.cols();
  Matrix z(n, p);
  z.col(0) = t_res;
  z.rightCols(x_het.cols()) = x_het.array().colwise() * t_res.array();

  Eigen::ColPivHouseholderQR<Matrix> qr(z);
  if (qr.rank() < p || n < p) throw EstimationError("no identifying variation: final-stage design is singular");
  const Vector beta = qr.solve(y_res);
  const Vector e = y_res - z * beta;

  const Matrix bread = (z.transpose() * z).ldlt().solve(Matrix::Identity(p, p));
  const Matrix meat = z.transpose() * e.array().square().matrix().asDiagonal() * z;
  Matrix cov = bread * meat * bread;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {beta, std::move(cov), n, {}};
}

double cate(const CateModel& model, const Vector& x_het_row) {
  if (x_het_row.size() + 1 != model.beta.size())
    throw DataError("cate: row has " + std::to_string(x_het_row.size()) + " features, model expects " +
                    std::to_string(model.beta.size() - 1));
  return model.beta[0] + model.beta.tail(x_het_row.size()).dot(x_het_row);
}

void summarize_ate(const CateModel& model, const Matrix& x_het, EffectEstimate& out) {
  Vector m(model.beta.size());
  m[0] = 1.0;
  m.tail(x_het.cols()) = x_het.colwise().mean().transpose();
  // Mean of theta(x_i) over the sample.
  out.ate = m.dot(model.beta);
  out.ate_se = std::sqrt(std::max(0.0, m.dot(model.cov * m)));
  out.ci_low = out.ate - 1.96 * out.ate_se;
  out.ci_high = out.ate + 1.96 * out.ate_se;
}

EffectEstimate estimate(const Dataset& data, const DmlSpec& spec, Executor& exec, StageTimes* times,
                        NuisancePredictions* nuisances) {
  spec.validate(data.d());
  EffectEstimate out;

  auto t0 = Clock::now();
  out.y_learner = resolve_tuned(spec.y_model, data.x(), data.y(), exec);
  out.t_learner = resolve_tuned(spec.t_model, data.x(), data.t(), exec);
  const double tune_s = seconds_since(t0);

  t0 = Clock::now();
  const auto plan = make_folds(data.n(), spec.k, spec.seed);
  const auto nuis = crossfit_predict(data, out.y_learner, out.t_learner, plan, exec);
  const double crossfit_s = seconds_since(t0);

  t0 = Clock::now();
  const auto res = residualize(data, nuis, spec.trim_eta);
  const auto het = spec.het_columns(data.d());
  const Matrix x_het = data.columns(het);
  out.cate_model = fit_final(res.y_res, res.t_res, x_het);
  out.cate_model.het_features = het;
  summarize_ate(out.cate_model, x_het, out);

  auto& diag = out.nuisance_diag;
  diag.y_fold_mse = nuis.y_fold_mse;
  diag.t_fold_mse = nuis.t_fold_mse;
  diag.t_hat_min = nuis.t_hat.minCoeff();
  diag.t_hat_max = nuis.t_hat.maxCoeff();
  if (data.discrete_treatment()) {
    Eigen::Index clipped = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i)
      clipped += (nuis.t_hat[i] < spec.trim_eta || nuis.t_hat[i] > 1.0 - spec.trim_eta) ? 1 : 0;
    diag.frac_clipped = static_cast<double>(clipped) / static_cast<double>(data.n());
  }
  if (times) *times = {tune_s, crossfit_s, seconds_since(t0)};
  if (nuisances) *nuisances = nuis;
  return out;
}

PluginEstimate plugin_estimate(const Dataset& data) {
  if (!data.discrete_treatment()) throw ConfigError("plugin estimate requires a binary treatment");
  struct Cell {
    double n[2] = {0, 0};
    double sum[2] = {0, 0};
    double sumsq[2] = {0, 0};
  };
  std::map<std::vector<double>, Cell> cells;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    std::vector<double> key(static_cast<std::size_t>(data.d()));
    for (Eigen::Index j = 0; j < data.d(); ++j) key[static_cast<std::size_t>(j)] = data.x()(i, j);
    auto& c = cells[key];
    if (cells.size() > 64) throw ConfigError("plugin estimate supports at most 64 covariate strata");
    const int arm = data.t()[i] == 1.0 ? 1 : 0;
    c.n[arm] += 1;
    c.sum[arm] += data.y()[i];
    c.sumsq[arm] += data.y()[i] * data.y()[i];
  }
  const auto n = static_cast<double>(data.n());
  double ate = 0.0, var = 0.0;
  for (const auto& [key, c] : cells) {
    if (c.n[0] == 0 || c.n[1] == 0)
      throw EstimationError("overlap violated: a covariate stratum lacks one treatment arm");
    const double w = (c.n[0] + c.n[1]) / n;
    double arm_var = 0.0;
    double mean[2];
    for (int a = 0; a < 2; ++a) {
      mean[a] = c.sum[a] / c.n[a];
      if (c.n[a] > 1) {
        const double s2 = (c.sumsq[a] - c.n[a] * mean[a] * mean[a]) / (c.n[a] - 1);
        arm_var += std::max(0.0, s2) / c.n[a];
      }
    }
    ate += w * (mean[1] - mean[0]);
    var += w * w * arm_var;
  }
  return {ate, std::sqrt(var), cells.size()};
}

double plugin_ate(const Dataset& data) { return plugin_estimate(data).ate; }

}  // namespace ocml
