#include "ocml/bench.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <thread>

#include "ocml/errors.hpp"
#include "ocml/report.hpp"
#include "ocml/runtime.hpp"

namespace ocml {

namespace {

struct Run {
  double wall = 0.0;
  StageTimes stages;
  std::string fingerprint;
};

Run timed_estimate(const Dataset& data, const DmlSpec& spec, std::size_t workers) {
  Executor exec(workers);
  Run run;
  const auto t0 = std::chrono::steady_clock::now();
  const auto est = estimate(data, spec, exec, &run.stages);
  run.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.fingerprint = estimate_fingerprint(est);
  return run;
}

}  // namespace

BenchReport benchmark(const std::vector<std::pair<Eigen::Index, Eigen::Index>>& sizes,
                      const std::vector<std::size_t>& worker_counts, const DmlSpec& spec, std::uint64_t seed) {
  if (sizes.empty()) throw ConfigError("benchmark needs at least one (n, d) size");
  if (worker_counts.empty()) throw ConfigError("benchmark needs at least one worker count");
  for (auto w : worker_counts)
    if (w < 1) throw ConfigError("worker counts must be positive");

  BenchReport report;
  report.hardware_threads = std::thread::hardware_concurrency();
  report.environment = "hardware_threads=" + std::to_string(report.hardware_threads);

  for (const auto& [n, d] : sizes) {
    DgpSpec dgp;
    dgp.n = n;
    dgp.d = d;
    dgp.seed = seed;
    const auto synth = generate_synthetic(dgp);

    std::vector<Run> runs;
    for (auto w : worker_counts) runs.push_back(timed_estimate(synth.data, spec, w));
    const auto seq_it = std::find(worker_counts.begin(), worker_counts.end(), std::size_t{1});
    const Run baseline = seq_it != worker_counts.end()
                             ? runs[static_cast<std::size_t>(seq_it - worker_counts.begin())]
                             : timed_estimate(synth.data, spec, 1);

    for (std::size_t r = 0; r < runs.size(); ++r) {
      if (runs[r].fingerprint != baseline.fingerprint)
        throw EstimationError("estimates differ between workers=1 and workers=" + std::to_string(worker_counts[r]) +
                              " for n=" + std::to_string(n) + ", d=" + std::to_string(d));
      const bool sequential = worker_counts[r] == 1;
      report.rows.push_back({n, d, worker_counts[r], runs[r].wall, sequential ? 1.0 : baseline.wall / runs[r].wall,
                             runs[r].stages.crossfit_seconds, runs[r].stages.final_seconds,
                             sequential ? 1.0 : baseline.stages.crossfit_seconds / runs[r].stages.crossfit_seconds});
    }
  }
  return report;
}

void write_bench_csv(std::ostream& out, const BenchReport& report) {
  out << "n,d,workers,wall_seconds,speedup\n";
  for (const auto& r : report.rows)
    out << r.n << ',' << r.d << ',' << r.workers << ',' << r.wall_seconds << ',' << r.speedup << '\n';
}

void write_stage_csv(std::ostream& out, const BenchReport& report) {
  out << "n,d,workers,crossfit_seconds,final_seconds,crossfit_speedup\n";
  for (const auto& r : report.rows)
    out << r.n << ',' << r.d << ',' << r.workers << ',' << r.crossfit_seconds << ',' << r.final_seconds << ','
        << r.crossfit_speedup << '\n';
}

}  // namespace ocml
