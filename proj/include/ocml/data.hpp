#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ocml {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Observations (x, t, y). Invariants are checked on construction and the
// object is immutable afterwards, so it can be shared across workers.
class Dataset {
 public:
  Dataset(Matrix x, Vector t, Vector y, bool discrete_treatment,
          std::vector<std::string> feature_names = {});

  const Matrix& x() const { return x_; }
  const Vector& t() const { return t_; }
  const Vector& y() const { return y_; }
  bool discrete_treatment() const { return discrete_; }
  const std::vector<std::string>& feature_names() const { return names_; }

  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index d() const { return x_.cols(); }

  Dataset with_treatment(Vector t) const;
  Dataset with_outcome(Vector y) const;
  Dataset with_extra_column(const Vector& column, std::string name) const;
  Dataset rows(std::span<const Eigen::Index> index) const;
  Matrix columns(std::span<const Eigen::Index> cols) const;

 private:
  Matrix x_;
  Vector t_;
  Vector y_;
  bool discrete_;
  std::vector<std::string> names_;
};

struct GroundTruth {
  Vector y0;
  Vector y1;
  Vector tau;
  Vector propensity;  // P(T=1 | X, U) actually used for assignment
  double true_ate = 0.0;
};

enum class OutcomeKind { heterogeneous, linear, zero_effect };
enum class CovariateKind { gaussian, binary };

struct DgpSpec {
  std::int64_t n = 1000;
  std::int64_t d = 5;
  OutcomeKind outcome_kind = OutcomeKind::heterogeneous;
  CovariateKind covariate_kind = CovariateKind::gaussian;
  double confounding_strength = 1.0;
  double unobserved_confounding = 0.0;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  Dataset data;
  GroundTruth truth;
};

// Seed for row `row` of a dataset generated with `seed`.
std::uint64_t row_seed(std::uint64_t seed, std::int64_t row);

using RowSeeder = std::function<std::uint64_t(std::uint64_t seed, std::int64_t row)>;

// Draws each row independently from its own stream:
//   x ~ N(0, I_d) (or Bernoulli(1/2) per column for binary covariates)
//   u ~ N(0, 1), hidden
//   P(T=1) = expit(c * x0 + s_u * u)
//   Y = tau(x) * T + baseline(x) + s_u * u + noise_sd * eps
// with tau(x) = 1 + 0.5 x0 (zero for zero_effect) and baseline x0, or
// sum_j x_j / (j + 1) for the linear kind.
SyntheticData generate_synthetic(const DgpSpec& spec);
SyntheticData generate_synthetic(const DgpSpec& spec, const RowSeeder& seeder);

double expit(double z);

struct CsvColumns {
  std::string treatment;
  std::string outcome;
  std::vector<std::string> covariates;  // empty: every other column
  bool discrete_treatment = true;
};

Dataset load_csv(const std::string& path, const CsvColumns& columns);
Dataset read_csv(std::istream& in, const CsvColumns& columns);

// Columns: covariates, "T", "Y", then "__gt_y0", "__gt_y1", "__gt_tau" when
// ground truth is supplied. Values are written in shortest round-trip form.
void write_csv(std::ostream& out, const Dataset& data, const GroundTruth* truth = nullptr);
void save_csv(const std::string& path, const Dataset& data, const GroundTruth* truth = nullptr);

std::string to_string(OutcomeKind kind);
OutcomeKind outcome_kind_from_string(const std::string& s);
std::string to_string(CovariateKind kind);
CovariateKind covariate_kind_from_string(const std::string& s);

}  // namespace ocml
