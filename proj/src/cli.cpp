#include "ocml/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ocml/bench.hpp"
#include "ocml/data.hpp"
#include "ocml/dml.hpp"
#include "ocml/errors.hpp"
#include "ocml/refute.hpp"
#include "ocml/report.hpp"
#include "ocml/runtime.hpp"
#include "ocml/tune.hpp"

namespace ocml {

namespace {

using json = nlohmann::json;

struct Flags {
  std::string config_path;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::string out_path;
};

// Effective configuration after flag overrides. Echoed verbatim into every
// report so a run can be repeated from its output.
struct RunConfig {
  json raw;
  std::optional<DgpSpec> dgp;
  std::optional<std::pair<std::string, CsvColumns>> csv;
  DmlSpec dml;
  std::size_t workers = 1;
  std::string out_path;
};

json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

RunConfig load_run_config(const Flags& flags, bool needs_data) {
  RunConfig rc;
  rc.raw = read_config(flags.config_path);
  if (!rc.raw.is_object()) throw ConfigError("config must be a JSON object");
  json& raw = rc.raw;

  if (flags.workers) raw["workers"] = *flags.workers;
  if (flags.seed) {
    if (raw.contains("data") && raw["data"].contains("dgp")) raw["data"]["dgp"]["seed"] = *flags.seed;
    raw["dml"]["seed"] = *flags.seed;
    if (raw.contains("refute")) raw["refute"]["seed"] = *flags.seed;
    if (raw.contains("bench")) raw["bench"]["seed"] = *flags.seed;
  }
  if (!flags.out_path.empty()) raw["out"] = flags.out_path;

  try {
    const long long workers = raw.value("workers", 1LL);
    if (workers < 1) throw ConfigError("workers must be >= 1");
    rc.workers = static_cast<std::size_t>(workers);
    rc.out_path = raw.value("out", std::string());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (needs_data) {
    if (!raw.contains("data") || !raw["data"].is_object()) throw ConfigError("config needs a 'data' section");
    const auto& data = raw["data"];
    const bool has_dgp = data.contains("dgp"), has_csv = data.contains("csv");
    if (has_dgp == has_csv) throw ConfigError("data must hold exactly one of 'dgp' or 'csv'");
    if (has_dgp) {
      rc.dgp = dgp_from_json(data["dgp"]);
    } else {
      const auto& c = data["csv"];
      try {
        CsvColumns cols;
        cols.treatment = c.value("treatment", std::string("T"));
        cols.outcome = c.value("outcome", std::string("Y"));
        cols.covariates = c.value("covariates", std::vector<std::string>{});
        cols.discrete_treatment = c.value("discrete_treatment", true);
        rc.csv.emplace(c.at("path").get<std::string>(), cols);
      } catch (const json::exception& e) {
        throw ConfigError(std::string("data.csv: ") + e.what());
      }
    }
  }
  try {
    rc.dml = dml_from_json(raw.value("dml", json::object()));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dml: ") + e.what());
  }
  return rc;
}

struct LoadedData {
  Dataset data;
  std::optional<GroundTruth> truth;
};

LoadedData load_data(const RunConfig& rc) {
  if (rc.dgp) {
    auto synth = generate_synthetic(*rc.dgp);
    return {std::move(synth.data), std::move(synth.truth)};
  }
  return {load_csv(rc.csv->first, rc.csv->second), std::nullopt};
}

void emit(const RunConfig& rc, const json& report, std::ostream& out) {
  const std::string text = report.dump(2) + "\n";
  if (rc.out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(rc.out_path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + rc.out_path + "'");
  f << text;
  if (!f) throw ConfigError("write failed for '" + rc.out_path + "'");
}

json report_header(const std::string& command, const RunConfig& rc) {
  return {{"format", "ocml.report"}, {"version", kReportVersion}, {"command", command}, {"config", rc.raw},
          {"workers", rc.workers}};
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_generate(const Flags& flags, std::ostream& out) {
  auto rc = load_run_config(flags, true);
  if (!rc.dgp) throw ConfigError("generate needs data.dgp");
  if (rc.out_path.empty()) throw ConfigError("generate needs --out or 'out'");
  const bool with_truth = rc.raw.value("generate", json::object()).value("ground_truth", true);
  const auto synth = generate_synthetic(*rc.dgp);
  save_csv(rc.out_path, synth.data, with_truth ? &synth.truth : nullptr);
  out << json{{"n", synth.data.n()}, {"d", synth.data.d()}, {"true_ate", synth.truth.true_ate}, {"out", rc.out_path}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_estimate(const Flags& flags, std::ostream& out) {
  auto rc = load_run_config(flags, true);
  const auto loaded = load_data(rc);
  Executor exec(rc.workers);
  StageTimes times;
  const auto t0 = std::chrono::steady_clock::now();
  const auto est = estimate(loaded.data, rc.dml, exec, &times);
  json rep = report_header("estimate", rc);
  rep["result"] = to_json(est);
  rep["seed"] = rc.dml.seed;
  rep["n"] = loaded.data.n();
  rep["d"] = loaded.data.d();
  if (loaded.truth) rep["true_ate"] = loaded.truth->true_ate;
  rep["timing"] = {{"wall_seconds", elapsed(t0)},
                   {"tune_seconds", times.tune_seconds},
                   {"crossfit_seconds", times.crossfit_seconds},
                   {"final_seconds", times.final_seconds}};
  emit(rc, rep, out);
  return kExitOk;
}

int cmd_tune(const Flags& flags, std::ostream& out) {
  auto rc = load_run_config(flags, true);
  const auto& tc = rc.raw.value("tune", json::object());
  if (!tc.contains("grid")) throw ConfigError("tune needs tune.grid");
  const std::string target = tc.value("target", std::string("y"));
  if (target != "y" && target != "t") throw ConfigError("tune.target must be 'y' or 't'");
  const auto grid = grid_from_json(tc["grid"]);
  const auto loaded = load_data(rc);
  Executor exec(rc.workers);
  const auto res = grid_search(loaded.data.x(), target == "y" ? loaded.data.y() : loaded.data.t(), grid, exec);
  json rep = report_header("tune", rc);
  rep["result"] = to_json(res);
  rep["tasks_submitted"] = exec.counters().tasks_submitted;
  emit(rc, rep, out);
  return kExitOk;
}

int cmd_refute(const Flags& flags, std::ostream& out) {
  auto rc = load_run_config(flags, true);
  const auto rcfg = rc.raw.value("refute", json::object());
  const auto tests = rcfg.value("tests", json::array());
  if (!tests.is_array() || tests.empty()) throw ConfigError("refute.tests must list at least one refuter");
  const std::uint64_t seed = rcfg.value("seed", std::uint64_t{0});
  RefuteThresholds th;
  if (rcfg.contains("thresholds")) {
    const auto& t = rcfg["thresholds"];
    th.se_multiplier = t.value("se_multiplier", th.se_multiplier);
    th.max_rel_drift = t.value("max_rel_drift", th.max_rel_drift);
    th.sd_multiplier = t.value("sd_multiplier", th.sd_multiplier);
  }
  // Validate every entry before spending time on estimation.
  for (const auto& t : tests) {
    const auto name = t.value("name", std::string());
    if (name != "placebo_treatment" && name != "random_common_cause" && name != "subset")
      throw ConfigError("unknown refuter '" + name + "'");
    if (t.value("n_runs", 1) < 1) throw ConfigError("refuter '" + name + "': n_runs must be >= 1");
    if (name == "subset") {
      const double frac = t.value("frac", 0.5);
      if (!(frac > 0.0 && frac <= 1.0)) throw ConfigError("subset refuter: frac must be in (0, 1]");
    }
  }

  const auto loaded = load_data(rc);
  Executor exec(rc.workers);
  NuisancePredictions nuis;
  const auto original = estimate(loaded.data, rc.dml, exec, nullptr, &nuis);

  json reports = json::array();
  for (const auto& t : tests) {
    const auto name = t.value("name", std::string());
    const int n_runs = t.value("n_runs", 1);
    RefutationReport r;
    if (name == "placebo_treatment") {
      r = placebo_treatment(loaded.data, rc.dml, exec, n_runs, seed, th, &original);
    } else if (name == "random_common_cause") {
      r = random_common_cause(loaded.data, rc.dml, exec, n_runs, seed, th, &original);
    } else {
      r = subset_refuter(loaded.data, rc.dml, exec, t.value("frac", 0.5), n_runs, seed, th, &original);
    }
    reports.push_back(to_json(r));
  }
  json rep = report_header("refute", rc);
  rep["original"] = to_json(original);
  rep["refutations"] = reports;
  if (loaded.data.discrete_treatment())
    rep["overlap"] = to_json(overlap_diagnostic(nuis, rcfg.value("overlap_eta", 0.05)));
  emit(rc, rep, out);
  return kExitOk;
}

int cmd_bench(const Flags& flags, std::ostream& out) {
  auto rc = load_run_config(flags, false);
  const auto b = rc.raw.value("bench", json::object());
  std::vector<std::pair<Eigen::Index, Eigen::Index>> sizes;
  std::vector<std::size_t> workers;
  try {
    for (const auto& s : b.value("sizes", json::array({json::array({10000, 20}), json::array({100000, 20})})))
      sizes.emplace_back(s.at(0).get<Eigen::Index>(), s.at(1).get<Eigen::Index>());
    workers = b.value("workers", std::vector<std::size_t>{1, 4});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bench: ") + e.what());
  }
  const auto report = benchmark(sizes, workers, rc.dml, b.value("seed", std::uint64_t{0}));

  std::ostringstream csv, stages;
  write_bench_csv(csv, report);
  write_stage_csv(stages, report);
  if (rc.out_path.empty()) {
    out << csv.str() << "\n" << stages.str();
  } else {
    std::ofstream f(rc.out_path, std::ios::binary);
    std::ofstream g(rc.out_path + ".stages.csv", std::ios::binary);
    if (!f || !g) throw ConfigError("cannot write '" + rc.out_path + "'");
    f << csv.str();
    g << stages.str();
    out << "# " << report.environment << "\n" << csv.str();
  }
  return kExitOk;
}

int report_error(std::ostream& err, const char* kind, const std::string& message, int code) {
  err << json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << "\n";
  return code;
}

int classify(std::ostream& err, const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const TaskError& e) {
    if (e.cause()) return classify(err, e.cause());
    return report_error(err, "estimation", e.what(), kExitEstimation);
  } catch (const ConfigError& e) {
    return report_error(err, "config", e.what(), kExitConfig);
  } catch (const DataError& e) {
    return report_error(err, "data", e.what(), kExitData);
  } catch (const EstimationError& e) {
    return report_error(err, "estimation", e.what(), kExitEstimation);
  } catch (const std::exception& e) {
    return report_error(err, "estimation", e.what(), kExitEstimation);
  }
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parallel double/debiased ML: generate, estimate, tune, refute, bench"};
  app.require_subcommand(1);
  Flags flags;
  std::size_t workers = 0;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config_path, "JSON run configuration")->required();
    sub->add_option("--workers", workers, "executor workers (overrides config)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "seed override for data, estimator and refuters");
    sub->add_option("--out", flags.out_path, "output path (overrides config)");
  };
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset to CSV");
  auto* est = app.add_subcommand("estimate", "estimate ATE/CATE and write a report");
  auto* tun = app.add_subcommand("tune", "grid-search a nuisance learner");
  auto* ref = app.add_subcommand("refute", "run refutation tests");
  auto* ben = app.add_subcommand("bench", "time sequential vs parallel estimation");
  for (auto* s : {gen, est, tun, ref, ben}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return report_error(err, "config", e.what(), kExitConfig);
  }
  for (auto* s : {gen, est, tun, ref, ben}) {
    if (s->count("--workers") > 0) flags.workers = workers;
    if (s->count("--seed") > 0) flags.seed = seed;
  }

  try {
    if (gen->parsed()) return cmd_generate(flags, out);
    if (est->parsed()) return cmd_estimate(flags, out);
    if (tun->parsed()) return cmd_tune(flags, out);
    if (ref->parsed()) return cmd_refute(flags, out);
    return cmd_bench(flags, out);
  } catch (...) {
    return classify(err, std::current_exception());
  }
}

}  // namespace ocml
