#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ocml/dml.hpp"

namespace ocml {

struct BenchRow {
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  std::size_t workers = 1;
  double wall_seconds = 0.0;
  double speedup = 1.0;
  double crossfit_seconds = 0.0;
  double final_seconds = 0.0;
  double crossfit_speedup = 1.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  unsigned hardware_threads = 0;
  std::string environment;
};

// For each (n, d): generates data from the default generator with `seed`, runs estimate()
// once per worker count, checks that every run produced identical bytes, and
// records wall time and speedup against a workers=1 run.
BenchReport benchmark(const std::vector<std::pair<Eigen::Index, Eigen::Index>>& sizes,
                      const std::vector<std::size_t>& worker_counts, const DmlSpec& spec, std::uint64_t seed);

// Header: n,d,workers,wall_seconds,speedup
void write_bench_csv(std::ostream& out, const BenchReport& report);
// Header: n,d,workers,crossfit_seconds,final_seconds,crossfit_speedup
void write_stage_csv(std::ostream& out, const BenchReport& report);

}  // namespace ocml
