#include "ocml/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ocml/crossfit.hpp"
#include "ocml/errors.hpp"
#include "ocml/rng.hpp"
#include "ocml/runtime.hpp"

namespace ocml {

void LearnerSpec::validate() const {
  const auto& p = params;
  if (!(p.ridge_lambda >= 0.0)) throw ConfigError("ridge_lambda must be >= 0");
  if (!(p.logistic_l2 >= 0.0)) throw ConfigError("logistic_l2 must be >= 0");
  if (p.logistic_max_iter < 1) throw ConfigError("logistic_max_iter must be positive");
  if (p.n_trees < 1) throw ConfigError("n_trees must be positive");
  if (p.max_depth < 0) throw ConfigError("max_depth must be >= 0");
  if (p.min_leaf < 1) throw ConfigError("min_leaf must be positive");
  if (!(p.max_features > 0.0 && p.max_features <= 1.0)) throw ConfigError("max_features must be in (0, 1]");
}

const LinearModel& FittedModel::linear() const {
  if (auto* m = std::get_if<LinearModel>(&state_)) return *m;
  throw ConfigError("model is not linear");
}

const ForestModel& FittedModel::forest() const {
  if (auto* m = std::get_if<ForestModel>(&state_)) return *m;
  throw ConfigError("model is not a forest");
}

double Tree::predict(const double* row, Eigen::Index stride) const {
  std::int32_t i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& nd = nodes[static_cast<std::size_t>(i)];
    i = row[nd.feature * stride] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

namespace {

void check_inputs(const LearnerSpec& spec, const Matrix& x, const Vector& target) {
  spec.validate();
  if (x.rows() != target.size())
    throw DataError("row mismatch: x has " + std::to_string(x.rows()) + " rows, target has " +
                    std::to_string(target.size()));
  if (x.rows() < 2) throw DataError("need at least 2 rows to fit");
  if (x.cols() < 1) throw DataError("need at least one feature");
  if (!x.allFinite() || !target.allFinite()) throw DataError("non-finite training data");
  if (spec.is_classifier()) {
    for (Eigen::Index i = 0; i < target.size(); ++i)
      if (target[i] != 0.0 && target[i] != 1.0) throw DataError("classifier targets must be 0 or 1");
  }
}

// ---- ridge ----

LinearModel fit_ridge(const Matrix& x, const Vector& y, double lambda) {
  const Eigen::RowVectorXd mx = x.colwise().mean();
  const double my = y.mean();
  const Matrix xc = x.rowwise() - mx;
  const Vector yc = y.array() - my;
  Matrix a = xc.transpose() * xc;
  a.diagonal().array() += lambda;
  const Vector b = xc.transpose() * yc;
  Vector w;
  if (lambda > 0.0) {
    w = a.ldlt().solve(b);
  } else {
    // Minimum-norm solution when the Gram matrix is singular.
    w = a.completeOrthogonalDecomposition().solve(b);
  }
  return {my - mx.dot(w), std::move(w), false};
}

// ---- logistic ----

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Vector linear_score(const Vector& beta, const Matrix& x) {
  return (x * beta.tail(beta.size() - 1)).array() + beta[0];
}

LinearModel fit_logistic(const Matrix& x, const Vector& y, double l2, int max_iter) {
  const Eigen::Index d = x.cols();
  Vector beta = Vector::Zero(d + 1);
  double obj = logistic_objective(beta, x, y, l2);
  Matrix xa(x.rows(), d + 1);
  xa.col(0).setOnes();
  xa.rightCols(d) = x;

  for (int iter = 0; iter < max_iter; ++iter) {
    const Vector g = logistic_gradient(beta, x, y, l2);
    if (g.norm() <= 1e-8) break;
    const Vector z = linear_score(beta, x);
    Vector wts(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double p = expit(z[i]);
      wts[i] = p * (1.0 - p);
    }
    Matrix h = xa.transpose() * wts.asDiagonal() * xa;
    h.diagonal().tail(d).array() += l2;
    auto ldlt = h.ldlt();
    Vector step = ldlt.solve(g);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) step = h.completeOrthogonalDecomposition().solve(g);

    double scale = 1.0;
    bool improved = false;
    for (int halving = 0; halving <= 30; ++halving) {
      const Vector cand = beta - scale * step;
      const double cand_obj = logistic_objective(cand, x, y, l2);
      if (cand_obj < obj) {
        beta = cand;
        obj = cand_obj;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
  }
  return {beta[0], beta.tail(d), true};
}

// ---- forest ----

struct ForestData {
  Matrix x;                                // rows in canonical order, column-major
  Vector y;
  std::vector<std::vector<std::uint32_t>> order;  // per feature: rows sorted by value
};

// Canonical row order (lexicographic on features, then target) so that the
// bootstrap stream does not depend on the caller's row order.
ForestData prepare_forest_data(const Matrix& x, const Vector& y) {
  const Eigen::Index n = x.rows(), d = x.cols();
  std::vector<std::uint32_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0u);
  std::stable_sort(perm.begin(), perm.end(), [&](std::uint32_t a, std::uint32_t b) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
    }
    return y[a] < y[b];
  });
  ForestData fd{Matrix(n, d), Vector(n), {}};
  for (Eigen::Index r = 0; r < n; ++r) {
    fd.x.row(r) = x.row(perm[static_cast<std::size_t>(r)]);
    fd.y[r] = y[perm[static_cast<std::size_t>(r)]];
  }
  fd.order.resize(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    auto& ord = fd.order[static_cast<std::size_t>(j)];
    ord.resize(static_cast<std::size_t>(n));
    std::iota(ord.begin(), ord.end(), 0u);
    const double* col = fd.x.col(j).data();
    std::stable_sort(ord.begin(), ord.end(), [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }
  return fd;
}

class TreeBuilder {
 public:
  TreeBuilder(const ForestData& fd, const HyperParams& p, bool gini, std::uint64_t seed)
      : fd_(fd), p_(p), gini_(gini), rng_(seed) {
    d_ = fd.x.cols();
    mtry_ = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(p.max_features * static_cast<double>(d_))));
  }

  Tree build() {
    const auto n = static_cast<std::size_t>(fd_.x.rows());
    stats_.assign(n, RowStat{});
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
    for (std::size_t b = 0; b < n; ++b) stats_[pick(rng_)].w += 1.0;
    for (std::size_t r = 0; r < n; ++r) stats_[r].wy = stats_[r].w * fd_.y[static_cast<Eigen::Index>(r)];

    lists_.resize(static_cast<std::size_t>(d_));
    for (Eigen::Index j = 0; j < d_; ++j) {
      auto& list = lists_[static_cast<std::size_t>(j)];
      const double* col = fd_.x.col(j).data();
      list.resize(n);
      std::size_t m = 0;
      for (auto r : fd_.order[static_cast<std::size_t>(j)]) {
        list[m] = {col[r], r};
        m += stats_[r].w > 0.0 ? 1 : 0;
      }
      list.resize(m);
    }
    scratch_.resize(lists_[0].size());
    goes_left_.assign(n, 0);
    features_.resize(static_cast<std::size_t>(d_));

    Tree tree;
    grow(tree, 0, lists_[0].size(), 0);
    refit_leaves(tree);
    return tree;
  }

 private:
  // A row of one feature's sorted list; the value is kept inline so split
  // scans read memory sequentially.
  struct Entry {
    double value;
    std::uint32_t row;
  };
  struct RowStat {
    double w = 0.0;   // bootstrap multiplicity
    double wy = 0.0;  // w * target
  };
  struct Split {
    Eigen::Index feature = -1;
    double threshold = 0.0;
    double score = 0.0;
  };

  std::int32_t grow(Tree& tree, std::size_t begin, std::size_t end, int depth) {
    const auto id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();

    const auto& rows = lists_[0];
    double w = 0.0, s = 0.0;
    double lo = fd_.y[rows[begin].row], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = rows[i].row;
      w += stats_[r].w;
      s += stats_[r].wy;
      lo = std::min(lo, fd_.y[r]);
      hi = std::max(hi, fd_.y[r]);
    }
    tree.nodes[static_cast<std::size_t>(id)].value = s / w;

    if (depth >= p_.max_depth || w < 2.0 * p_.min_leaf || lo == hi) return id;
    const Split best = find_split(begin, end, w, s);
    if (best.feature < 0) return id;

    std::size_t n_left = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& e = lists_[static_cast<std::size_t>(best.feature)][i];
      const std::uint8_t left = e.value <= best.threshold ? 1 : 0;
      goes_left_[e.row] = left;
      n_left += left;
    }
    for (auto& list : lists_) {
      std::size_t li = begin, ri = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const Entry e = list[i];
        const std::size_t g = goes_left_[e.row];
        list[li] = e;
        scratch_[ri] = e;
        li += g;
        ri += 1 - g;
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(ri),
                list.begin() + static_cast<std::ptrdiff_t>(li));
    }

    const std::size_t mid = begin + n_left;
    const auto left = grow(tree, begin, mid, depth + 1);
    const auto right = grow(tree, mid, end, depth + 1);
    auto& nd = tree.nodes[static_cast<std::size_t>(id)];
    nd.feature = static_cast<std::int32_t>(best.feature);
    nd.threshold = best.threshold;
    nd.left = left;
    nd.right = right;
    return id;
  }

  // Leaf values are means of every training row reaching the leaf; the
  // bootstrap sample only shapes the splits.
  void refit_leaves(Tree& tree) const {
    const Eigen::Index n = fd_.x.rows();
    std::vector<double> sum(tree.nodes.size(), 0.0), count(tree.nodes.size(), 0.0);
    for (Eigen::Index r = 0; r < n; ++r) {
      std::size_t i = 0;
      while (tree.nodes[i].feature >= 0) {
        const auto& nd = tree.nodes[i];
        i = static_cast<std::size_t>(fd_.x(r, nd.feature) <= nd.threshold ? nd.left : nd.right);
      }
      sum[i] += fd_.y[r];
      count[i] += 1.0;
    }
    for (std::size_t i = 0; i < tree.nodes.size(); ++i)
      if (tree.nodes[i].feature < 0 && count[i] > 0) tree.nodes[i].value = sum[i] / count[i];
  }

  // Split score is num(l)/w_l + num(r)/w_r; its increase over the parent's
  // num/w equals the impurity decrease (variance for regression, weighted Gini
  // for 0/1 targets).
  double numerator(double w, double s) const {
    if (gini_) {
      const double c0 = w - s;
      return c0 * c0 + s * s;
    }
    return s * s;
  }

  Split find_split(std::size_t begin, std::size_t end, double w_total, double s_total) {
    // Partial Fisher-Yates over feature ids, then scan in ascending id order
    // so ties resolve to the lowest feature, then the lowest threshold.
    std::iota(features_.begin(), features_.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<Eigen::Index> pick(i, d_ - 1);
      std::swap(features_[static_cast<std::size_t>(i)], features_[static_cast<std::size_t>(pick(rng_))]);
    }
    std::sort(features_.begin(), features_.begin() + mtry_);

    const double parent = numerator(w_total, s_total) / w_total;
    const double min_leaf = p_.min_leaf;
    Split best;
    best.score = parent;
    for (Eigen::Index fi = 0; fi < mtry_; ++fi) {
      const Eigen::Index f = features_[static_cast<std::size_t>(fi)];
      const Entry* list = lists_[static_cast<std::size_t>(f)].data();
      double wl = 0.0, sl = 0.0;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        const auto& st = stats_[list[i].row];
        wl += st.w;
        sl += st.wy;
        const double a = list[i].value, b = list[i + 1].value;
        if (a == b || wl < min_leaf) continue;
        const double wr = w_total - wl;
        if (wr < min_leaf) break;
        const double score = (numerator(wl, sl) * wr + numerator(wr, s_total - sl) * wl) / (wl * wr);
        if (score > best.score) {
          double mid = a + (b - a) * 0.5;
          if (!(mid < b)) mid = a;
          best = {f, mid, score};
        }
      }
    }
    return best;
  }

  const ForestData& fd_;
  const HyperParams& p_;
  bool gini_;
  Rng rng_;
  Eigen::Index d_ = 0;
  Eigen::Index mtry_ = 1;
  std::vector<RowStat> stats_;
  std::vector<std::vector<Entry>> lists_;
  std::vector<Entry> scratch_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<Eigen::Index> features_;
};

ForestModel fit_forest(const Matrix& x, const Vector& y, const HyperParams& p, bool gini, std::uint64_t seed,
                       Executor* exec) {
  const ForestData fd = prepare_forest_data(x, y);
  auto train = [&fd, &p, gini, seed](int t) {
    TreeBuilder builder(fd, p, gini, derive_seed(seed, {0x74726565ULL, static_cast<std::uint64_t>(t)}));
    return builder.build();
  };
  ForestModel forest;
  if (exec != nullptr && exec->workers() > 1) {
    std::vector<std::function<Tree()>> tasks;
    for (int t = 0; t < p.n_trees; ++t) tasks.emplace_back([&train, t] { return train(t); });
    forest.trees = exec->submit_all(tasks);
  } else {
    forest.trees.reserve(static_cast<std::size_t>(p.n_trees));
    for (int t = 0; t < p.n_trees; ++t) forest.trees.push_back(train(t));
  }
  return forest;
}

}  // namespace

FittedModel fit(const LearnerSpec& spec, const Matrix& x, const Vector& target, std::uint64_t seed, Executor* exec) {
  check_inputs(spec, x, target);
  const auto& p = spec.params;
  switch (spec.kind) {
    case LearnerKind::ridge:
      return {spec.kind, x.cols(), fit_ridge(x, target, p.ridge_lambda)};
    case LearnerKind::logistic:
      return {spec.kind, x.cols(), fit_logistic(x, target, p.logistic_l2, p.logistic_max_iter)};
    case LearnerKind::random_forest_reg:
    case LearnerKind::random_forest_clf:
      return {spec.kind, x.cols(),
              fit_forest(x, target, p, spec.kind == LearnerKind::random_forest_clf,
                         derive_seed(seed, {p.bootstrap_seed}), exec)};
  }
  throw ConfigError("unknown learner kind");
}

Vector predict(const FittedModel& model, const Matrix& x) {
  if (x.cols() != model.d_in())
    throw DataError("predict: input has " + std::to_string(x.cols()) + " columns, model expects " +
                    std::to_string(model.d_in()));
  const Eigen::Index n = x.rows();
  Vector out(n);
  switch (model.kind()) {
    case LearnerKind::ridge:
    case LearnerKind::logistic: {
      const auto& lm = model.linear();
      out = (x * lm.coef).array() + lm.intercept;
      if (lm.logistic)
        for (Eigen::Index i = 0; i < n; ++i) out[i] = expit(out[i]);
      break;
    }
    case LearnerKind::random_forest_reg:
    case LearnerKind::random_forest_clf: {
      const auto& trees = model.forest().trees;
      const double* base = x.data();
      for (Eigen::Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (const auto& tr : trees) acc += tr.predict(base + i, n);
        out[i] = acc / static_cast<double>(trees.size());
      }
      break;
    }
  }
  return out;
}

FoldLoss fold_loss(const LearnerSpec& spec, const Matrix& x, const Vector& target,
                   const std::vector<int>& assignment, int fold, std::uint64_t seed) {
  std::vector<Eigen::Index> in, out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    (assignment[i] == fold ? in : out).push_back(static_cast<Eigen::Index>(i));
  if (in.empty()) return {};
  const Matrix xo = x(out, Eigen::all);
  const Vector yo = target(out);
  const auto model = fit(spec, xo, yo, seed);
  const Vector pred = predict(model, x(in, Eigen::all));
  const Vector err = pred - target(in);
  return {err.squaredNorm(), static_cast<Eigen::Index>(in.size())};
}

double cv_score(const LearnerSpec& spec, const Matrix& x, const Vector& target, int k, std::uint64_t seed) {
  if (k < 2 || k > x.rows())
    throw ConfigError("fold count " + std::to_string(k) + " out of range [2, " + std::to_string(x.rows()) + "]");
  const auto plan = make_folds(x.rows(), k, seed);
  double total = 0.0;
  Eigen::Index count = 0;
  for (int f = 0; f < k; ++f) {
    const auto fl = fold_loss(spec, x, target, plan.assignment, f, derive_seed(seed, {static_cast<std::uint64_t>(f)}));
    total += fl.sum_sq;
    count += fl.count;
  }
  return total / static_cast<double>(count);
}

double logistic_objective(const Vector& beta, const Matrix& x, const Vector& y, double l2) {
  const Vector z = linear_score(beta, x);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) loss += softplus(z[i]) - y[i] * z[i];
  return loss + 0.5 * l2 * beta.tail(beta.size() - 1).squaredNorm();
}

Vector logistic_gradient(const Vector& beta, const Matrix& x, const Vector& y, double l2) {
  const Vector z = linear_score(beta, x);
  Vector r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) r[i] = expit(z[i]) - y[i];
  Vector g(beta.size());
  g[0] = r.sum();
  g.tail(beta.size() - 1) = x.transpose() * r + l2 * beta.tail(beta.size() - 1);
  return g;
}

double ridge_objective(const Vector& beta, const Matrix& x, const Vector& y, double lambda) {
  const Vector w = beta.tail(beta.size() - 1);
  const Vector r = y - ((x * w).array() + beta[0]).matrix();
  return r.squaredNorm() + lambda * w.squaredNorm();
}

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::ridge: return "ridge";
    case LearnerKind::logistic: return "logistic";
    case LearnerKind::random_forest_reg: return "random_forest_reg";
    case LearnerKind::random_forest_clf: return "random_forest_clf";
  }
  return "?";
}

LearnerKind learner_kind_from_string(const std::string& s) {
  if (s == "ridge") return LearnerKind::ridge;
  if (s == "logistic") return LearnerKind::logistic;
  if (s == "random_forest_reg") return LearnerKind::random_forest_reg;
  if (s == "random_forest_clf") return LearnerKind::random_forest_clf;
  throw ConfigError("unknown learner kind '" + s + "'");
}

// Model blob layout (version 1):
//   {"format": "ocml.model", "version": 1, "kind": ..., "d_in": ...,
//    linear kinds: "intercept", "coef": [...]
//    forests:      "trees": [[[feature, threshold, left, right, value], ...], ...]}
nlohmann::json model_to_json(const FittedModel& model) {
  nlohmann::json j{{"format", "ocml.model"}, {"version", 1}, {"kind", to_string(model.kind())}, {"d_in", model.d_in()}};
  if (model.kind() == LearnerKind::ridge || model.kind() == LearnerKind::logistic) {
    const auto& lm = model.linear();
    j["intercept"] = lm.intercept;
    j["coef"] = std::vector<double>(lm.coef.data(), lm.coef.data() + lm.coef.size());
  } else {
    auto trees = nlohmann::json::array();
    for (const auto& tr : model.forest().trees) {
      auto nodes = nlohmann::json::array();
      for (const auto& nd : tr.nodes) nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
      trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
  }
  return j;
}

FittedModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ocml.model" || j.value("version", 0) != 1)
    throw ConfigError("unsupported model blob");
  const auto kind = learner_kind_from_string(j.at("kind").get<std::string>());
  const auto d_in = j.at("d_in").get<Eigen::Index>();
  if (kind == LearnerKind::ridge || kind == LearnerKind::logistic) {
    const auto coef = j.at("coef").get<std::vector<double>>();
    LinearModel lm{j.at("intercept").get<double>(), Eigen::Map<const Vector>(coef.data(), static_cast<Eigen::Index>(coef.size())),
                   kind == LearnerKind::logistic};
    return {kind, d_in, std::move(lm)};
  }
  ForestModel fm;
  for (const auto& jt : j.at("trees")) {
    Tree tr;
    for (const auto& jn : jt)
      tr.nodes.push_back({jn.at(0).get<std::int32_t>(), jn.at(1).get<double>(), jn.at(2).get<std::int32_t>(),
                          jn.at(3).get<std::int32_t>(), jn.at(4).get<double>()});
    fm.trees.push_back(std::move(tr));
  }
  return {kind, d_in, std::move(fm)};
}

nlohmann::json spec_to_json(const LearnerSpec& spec) {
  const auto& p = spec.params;
  return {{"kind", to_string(spec.kind)},
          {"ridge_lambda", p.ridge_lambda},
          {"logistic_l2", p.logistic_l2},
          {"logistic_max_iter", p.logistic_max_iter},
          {"n_trees", p.n_trees},
          {"max_depth", p.max_depth},
          {"min_leaf", p.min_leaf},
          {"max_features", p.max_features},
          {"bootstrap_seed", p.bootstrap_seed}};
}

LearnerSpec spec_from_json(const nlohmann::json& j) {
  LearnerSpec s;
  HyperParams d;
  s.kind = learner_kind_from_string(j.at("kind").get<std::string>());
  s.params.ridge_lambda = j.value("ridge_lambda", d.ridge_lambda);
  s.params.logistic_l2 = j.value("logistic_l2", d.logistic_l2);
  s.params.logistic_max_iter = j.value("logistic_max_iter", d.logistic_max_iter);
  s.params.n_trees = j.value("n_trees", d.n_trees);
  s.params.max_depth = j.value("max_depth", d.max_depth);
  s.params.min_leaf = j.value("min_leaf", d.min_leaf);
  s.params.max_features = j.value("max_features", d.max_features);
  s.params.bootstrap_seed = j.value("bootstrap_seed", d.bootstrap_seed);
  s.validate();
  return s;
}

}  // namespace ocml
