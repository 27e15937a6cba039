#include "ocml/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "ocml/errors.hpp"
#include "ocml/rng.hpp"

namespace ocml {

namespace {

std::vector<std::string> default_names(Eigen::Index d) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) names.push_back("X" + std::to_string(j));
  return names;
}

bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

}  // namespace

Dataset::Dataset(Matrix x, Vector t, Vector y, bool discrete_treatment,
                 std::vector<std::string> feature_names)
    : x_(std::move(x)), t_(std::move(t)), y_(std::move(y)), discrete_(discrete_treatment),
      names_(std::move(feature_names)) {
  if (x_.rows() < 1) throw DataError("dataset has no rows");
  if (x_.cols() < 1) throw DataError("dataset has no covariates");
  if (t_.size() != x_.rows() || y_.size() != x_.rows())
    throw DataError("row count mismatch: x has " + std::to_string(x_.rows()) + ", t has " +
                    std::to_string(t_.size()) + ", y has " + std::to_string(y_.size()));
  if (names_.empty()) names_ = default_names(x_.cols());
  if (static_cast<Eigen::Index>(names_.size()) != x_.cols())
    throw DataError("feature name count does not match covariate count");
  if (!all_finite(x_)) throw DataError("non-finite value in covariates");
  if (!t_.allFinite()) throw DataError("non-finite value in treatment");
  if (!y_.allFinite()) throw DataError("non-finite value in outcome");
  if (discrete_) {
    bool seen0 = false, seen1 = false;
    for (Eigen::Index i = 0; i < t_.size(); ++i) {
      if (t_[i] == 0.0) {
        seen0 = true;
      } else if (t_[i] == 1.0) {
        seen1 = true;
      } else {
        throw DataError("discrete treatment must be 0 or 1 (row " + std::to_string(i) + ")");
      }
    }
    if (!seen0 || !seen1) throw DataError("degenerate treatment: only one treatment value present");
  }
}

Dataset Dataset::with_treatment(Vector t) const { return {x_, std::move(t), y_, discrete_, names_}; }

Dataset Dataset::with_outcome(Vector y) const { return {x_, t_, std::move(y), discrete_, names_}; }

Dataset Dataset::with_extra_column(const Vector& column, std::string name) const {
  if (column.size() != n()) throw DataError("extra column length mismatch");
  Matrix x(n(), d() + 1);
  x.leftCols(d()) = x_;
  x.col(d()) = column;
  auto names = names_;
  names.push_back(std::move(name));
  return {std::move(x), t_, y_, discrete_, std::move(names)};
}

Dataset Dataset::rows(std::span<const Eigen::Index> index) const {
  const auto m = static_cast<Eigen::Index>(index.size());
  Matrix x(m, d());
  Vector t(m), y(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = index[static_cast<std::size_t>(r)];
    x.row(r) = x_.row(i);
    t[r] = t_[i];
    y[r] = y_[i];
  }
  return {std::move(x), std::move(t), std::move(y), discrete_, names_};
}

Matrix Dataset::columns(std::span<const Eigen::Index> cols) const {
  Matrix out(n(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c] < 0 || cols[c] >= d()) throw DataError("column index out of range");
    out.col(static_cast<Eigen::Index>(c)) = x_.col(cols[c]);
  }
  return out;
}

void DgpSpec::validate() const {
  if (n < 2) throw ConfigError("dgp: n must be >= 2");
  if (d < 1) throw ConfigError("dgp: d must be >= 1");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ConfigError("dgp: noise_sd must be >= 0");
  if (!(unobserved_confounding >= 0.0) || !std::isfinite(unobserved_confounding))
    throw ConfigError("dgp: unobserved_confounding must be >= 0");
  if (!std::isfinite(confounding_strength)) throw ConfigError("dgp: confounding_strength must be finite");
}

double expit(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::uint64_t row_seed(std::uint64_t seed, std::int64_t row) {
  return derive_seed(seed, {0x726f77ULL, static_cast<std::uint64_t>(row)});
}

SyntheticData generate_synthetic(const DgpSpec& spec) { return generate_synthetic(spec, row_seed); }

SyntheticData generate_synthetic(const DgpSpec& spec, const RowSeeder& seeder) {
  spec.validate();
  const Eigen::Index n = spec.n, d = spec.d;
  Matrix x(n, d);
  Vector t(n), y(n);
  GroundTruth gt{Vector(n), Vector(n), Vector(n), Vector(n), 0.0};

  for (Eigen::Index i = 0; i < n; ++i) {
    Rng rng(seeder(spec.seed, i));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    for (Eigen::Index j = 0; j < d; ++j) {
      x(i, j) = spec.covariate_kind == CovariateKind::binary ? (unif(rng) < 0.5 ? 1.0 : 0.0) : normal(rng);
    }
    const double u = normal(rng);
    const double draw = unif(rng);
    const double eps = normal(rng);

    const double x0 = x(i, 0);
    const double p = expit(spec.confounding_strength * x0 + spec.unobserved_confounding * u);
    const double ti = draw < p ? 1.0 : 0.0;

    double base = 0.0;
    double tau = 1.0 + 0.5 * x0;
    switch (spec.outcome_kind) {
      case OutcomeKind::heterogeneous:
        base = x0;
        break;
      case OutcomeKind::linear:
        for (Eigen::Index j = 0; j < d; ++j) base += x(i, j) / static_cast<double>(j + 1);
        break;
      case OutcomeKind::zero_effect:
        base = x0;
        tau = 0.0;
        break;
    }
    // y0 carries the same noise draw as the observed outcome.
    const double y0 = base + spec.unobserved_confounding * u + spec.noise_sd * eps;
    const double y1 = y0 + tau;
    gt.y0[i] = y0;
    gt.y1[i] = y1;
    gt.tau[i] = y1 - y0;
    gt.propensity[i] = p;
    t[i] = ti;
    y[i] = ti == 1.0 ? y1 : y0;
  }
  gt.true_ate = gt.tau.mean();
  return {Dataset(std::move(x), std::move(t), std::move(y), true), std::move(gt)};
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw DataError("non-numeric cell '" + cell + "' at line " + std::to_string(line_no) + ", column '" +
                    column + "'");
  return v;
}

}  // namespace

Dataset read_csv(std::istream& in, const CsvColumns& columns) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_line(line);
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t c = 0; c < header.size(); ++c) pos.emplace(header[c], c);

  auto find = [&](const std::string& name) {
    auto it = pos.find(name);
    if (it == pos.end()) throw DataError("csv: missing column '" + name + "'");
    return it->second;
  };
  const std::size_t t_col = find(columns.treatment);
  const std::size_t y_col = find(columns.outcome);
  std::vector<std::string> cov_names = columns.covariates;
  if (cov_names.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == t_col || c == y_col || header[c].rfind("__gt_", 0) == 0) continue;
      cov_names.push_back(header[c]);
    }
  }
  std::vector<std::size_t> cov_cols;
  for (const auto& name : cov_names) cov_cols.push_back(find(name));
  if (cov_cols.empty()) throw DataError("csv: no covariate columns");

  std::vector<double> xs, ts, ys;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw DataError("csv: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(header.size()));
    for (auto c : cov_cols) xs.push_back(parse_cell(cells[c], line_no, header[c]));
    ts.push_back(parse_cell(cells[t_col], line_no, header[t_col]));
    ys.push_back(parse_cell(cells[y_col], line_no, header[y_col]));
  }
  const auto n = static_cast<Eigen::Index>(ts.size());
  const auto d = static_cast<Eigen::Index>(cov_cols.size());
  if (n == 0) throw DataError("csv: no data rows");
  if (!columns.discrete_treatment) {
    bool varies = false;
    for (double v : ts) varies = varies || v != ts.front();
    if (!varies) throw DataError("degenerate treatment: column '" + columns.treatment + "' is constant");
  }
  Matrix x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xs.data(), n, d);
  return {std::move(x), Eigen::Map<Vector>(ts.data(), n), Eigen::Map<Vector>(ys.data(), n),
          columns.discrete_treatment, cov_names};
}

Dataset load_csv(const std::string& path, const CsvColumns& columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, columns);
}

namespace {

void put_double(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, ptr - buf);
}

}  // namespace

void write_csv(std::ostream& out, const Dataset& data, const GroundTruth* truth) {
  for (const auto& name : data.feature_names()) out << name << ',';
  out << "T,Y";
  if (truth) out << ",__gt_y0,__gt_y1,__gt_tau";
  out << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.d(); ++j) {
      put_double(out, data.x()(i, j));
      out << ',';
    }
    put_double(out, data.t()[i]);
    out << ',';
    put_double(out, data.y()[i]);
    if (truth) {
      for (const Vector* v : {&truth->y0, &truth->y1, &truth->tau}) {
        out << ',';
        put_double(out, (*v)[i]);
      }
    }
    out << '\n';
  }
}

void save_csv(const std::string& path, const Dataset& data, const GroundTruth* truth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  write_csv(out, data, truth);
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

std::string to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::heterogeneous: return "heterogeneous";
    case OutcomeKind::linear: return "linear";
    case OutcomeKind::zero_effect: return "zero_effect";
  }
  return "?";
}

OutcomeKind outcome_kind_from_string(const std::string& s) {
  if (s == "heterogeneous") return OutcomeKind::heterogeneous;
  if (s == "linear") return OutcomeKind::linear;
  if (s == "zero_effect") return OutcomeKind::zero_effect;
  throw ConfigError("unknown outcome_kind '" + s + "'");
}

std::string to_string(CovariateKind kind) { return kind == CovariateKind::binary ? "binary" : "gaussian"; }

CovariateKind covariate_kind_from_string(const std::string& s) {
  if (s == "gaussian") return CovariateKind::gaussian;
  if (s == "binary") return CovariateKind::binary;
  throw ConfigError("unknown covariate_kind '" + s + "'");
}

}  // namespace ocml
