#include "ocml/report.hpp"

#include <cstdio>

#include "ocml/errors.hpp"

namespace ocml {

namespace {

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json matrix_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_vec(m.row(i).transpose()));
  return rows;
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

nlohmann::json to_json(const DgpSpec& s) {
  return {{"n", s.n},
          {"d", s.d},
          {"outcome_kind", to_string(s.outcome_kind)},
          {"covariate_kind", to_string(s.covariate_kind)},
          {"confounding_strength", s.confounding_strength},
          {"unobserved_confounding", s.unobserved_confounding},
          {"noise_sd", s.noise_sd},
          {"seed", s.seed}};
}

DgpSpec dgp_from_json(const nlohmann::json& j) {
  DgpSpec s;
  s.n = get_or(j, "n", s.n);
  s.d = get_or(j, "d", s.d);
  s.outcome_kind = outcome_kind_from_string(get_or<std::string>(j, "outcome_kind", to_string(s.outcome_kind)));
  s.covariate_kind = covariate_kind_from_string(get_or<std::string>(j, "covariate_kind", to_string(s.covariate_kind)));
  s.confounding_strength = get_or(j, "confounding_strength", s.confounding_strength);
  s.unobserved_confounding = get_or(j, "unobserved_confounding", s.unobserved_confounding);
  s.noise_sd = get_or(j, "noise_sd", s.noise_sd);
  s.seed = get_or(j, "seed", s.seed);
  s.validate();
  return s;
}

nlohmann::json to_json(const ParamGrid& grid) {
  auto cands = nlohmann::json::array();
  for (const auto& c : grid.candidates) cands.push_back(spec_to_json(c));
  return {{"candidates", cands}, {"cv_k", grid.cv_k}, {"seed", grid.seed}};
}

ParamGrid grid_from_json(const nlohmann::json& j) {
  ParamGrid g;
  if (!j.contains("candidates") || !j.at("candidates").is_array()) throw ConfigError("grid needs a candidates list");
  for (const auto& c : j.at("candidates")) g.candidates.push_back(spec_from_json(c));
  g.cv_k = get_or(j, "cv_k", g.cv_k);
  g.seed = get_or(j, "seed", g.seed);
  g.validate();
  return g;
}

nlohmann::json to_json(const NuisanceSpec& spec) {
  if (const auto* plain = std::get_if<LearnerSpec>(&spec)) return spec_to_json(*plain);
  return {{"grid", to_json(std::get<ParamGrid>(spec))}};
}

NuisanceSpec nuisance_from_json(const nlohmann::json& j) {
  if (j.contains("grid")) return grid_from_json(j.at("grid"));
  return spec_from_json(j);
}

nlohmann::json to_json(const DmlSpec& s) {
  nlohmann::json j{{"model_y", to_json(s.y_model)},
                   {"model_t", to_json(s.t_model)},
                   {"k", s.k},
                   {"seed", s.seed},
                   {"trim_eta", s.trim_eta}};
  j["het_features"] = s.het_features ? nlohmann::json(*s.het_features) : nlohmann::json(nullptr);
  return j;
}

DmlSpec dml_from_json(const nlohmann::json& j) {
  DmlSpec s;
  if (j.contains("model_y")) s.y_model = nuisance_from_json(j.at("model_y"));
  if (j.contains("model_t")) s.t_model = nuisance_from_json(j.at("model_t"));
  s.k = get_or(j, "k", s.k);
  s.seed = get_or(j, "seed", s.seed);
  s.trim_eta = get_or(j, "trim_eta", s.trim_eta);
  if (j.contains("het_features") && !j.at("het_features").is_null())
    s.het_features = j.at("het_features").get<std::vector<Eigen::Index>>();
  if (s.k < 2) throw ConfigError("k must be >= 2");
  if (!(s.trim_eta >= 0.0 && s.trim_eta < 0.5)) throw ConfigError("trim_eta must be in [0, 0.5)");
  return s;
}

nlohmann::json to_json(const EffectEstimate& est) {
  const auto& cm = est.cate_model;
  const auto& nd = est.nuisance_diag;
  return {{"ate", est.ate},
          {"ate_se", est.ate_se},
          {"ci_low", est.ci_low},
          {"ci_high", est.ci_high},
          {"cate_model",
           {{"beta", to_vec(cm.beta)}, {"cov", matrix_json(cm.cov)}, {"n_used", cm.n_used},
            {"het_features", cm.het_features}}},
          {"nuisance_diag",
           {{"y_fold_mse", nd.y_fold_mse},
            {"t_fold_mse", nd.t_fold_mse},
            {"t_hat_min", nd.t_hat_min},
            {"t_hat_max", nd.t_hat_max},
            {"frac_clipped", nd.frac_clipped}}},
          {"model_y", spec_to_json(est.y_learner)},
          {"model_t", spec_to_json(est.t_learner)}};
}

nlohmann::json to_json(const TuneResult& res) {
  auto scores = nlohmann::json::array();
  for (const auto& [spec, score] : res.scores) scores.push_back({{"spec", spec_to_json(spec)}, {"score", score}});
  return {{"best", spec_to_json(res.best)},
          {"best_index", res.best_index},
          {"scores", scores},
          {"wall_seconds", res.wall_seconds}};
}

nlohmann::json to_json(const RefutationReport& rep) {
  auto runs = nlohmann::json::array();
  for (const auto& r : rep.detail) runs.push_back({{"ate", r.ate}, {"se", r.se}, {"n", r.n}, {"d", r.d}});
  return {{"test_name", rep.test_name}, {"original_ate", rep.original_ate}, {"refuted_ate", rep.refuted_ate},
          {"refuted_se", rep.refuted_se}, {"n_runs", rep.n_runs},             {"passed", rep.passed},
          {"detail", runs}};
}

nlohmann::json to_json(const OverlapReport& rep) {
  return {{"p_min", rep.p_min}, {"p_max", rep.p_max}, {"frac_flagged", rep.frac_flagged}, {"eta", rep.eta}};
}

std::string estimate_fingerprint(const EffectEstimate& est) {
  std::string out;
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%a;", v);
    out += buf;
  };
  put(est.ate);
  put(est.ate_se);
  put(est.ci_low);
  put(est.ci_high);
  for (Eigen::Index i = 0; i < est.cate_model.beta.size(); ++i) put(est.cate_model.beta[i]);
  for (Eigen::Index i = 0; i < est.cate_model.cov.size(); ++i) put(est.cate_model.cov.data()[i]);
  for (double v : est.nuisance_diag.y_fold_mse) put(v);
  for (double v : est.nuisance_diag.t_fold_mse) put(v);
  put(est.nuisance_diag.t_hat_min);
  put(est.nuisance_diag.t_hat_max);
  put(est.nuisance_diag.frac_clipped);
  return out;
}

}  // namespace ocml
