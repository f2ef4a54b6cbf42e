#include "vicreg/probe.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace vicreg {

namespace {

int class_count(const std::vector<int>& a, const std::vector<int>& b) {
  int max_label = -1;
  for (int l : a) {
    if (l < 0) throw std::invalid_argument("probe: negative label");
    max_label = std::max(max_label, l);
  }
  for (int l : b) {
    if (l < 0) throw std::invalid_argument("probe: negative label");
    max_label = std::max(max_label, l);
  }
  return max_label + 1;
}

void check_inputs(const Matrix& train, const std::vector<int>& train_labels, const Matrix& eval,
                  const std::vector<int>& eval_labels) {
  require_nonempty(train, "probe train set");
  require_nonempty(eval, "probe eval set");
  require_finite(train, "probe train set");
  require_finite(eval, "probe eval set");
  if (train.cols() != eval.cols()) throw ShapeMismatchError("probe: feature dimensions differ");
  if (static_cast<Eigen::Index>(train_labels.size()) != train.rows() ||
      static_cast<Eigen::Index>(eval_labels.size()) != eval.rows()) {
    throw ShapeMismatchError("probe: label count does not match row count");
  }
}

int argmax_lowest(const RowVector& scores) {
  int best = 0;
  for (Eigen::Index c = 1; c < scores.size(); ++c) {
    if (scores(c) > scores(best)) best = static_cast<int>(c);
  }
  return best;
}

void score(ProbeResult& r, const std::vector<int>& labels) {
  r.n_eval = static_cast<long>(labels.size());
  r.n_correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (r.predictions[i] == labels[i]) ++r.n_correct;
  }
  r.accuracy = static_cast<double>(r.n_correct) / static_cast<double>(r.n_eval);
}

Matrix safe_normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

}  // namespace

std::string to_string(ProbeProtocol p) { return p == ProbeProtocol::kLinear ? "linear" : "knn"; }

ProbeResult linear_probe(const Matrix& train_reps, const std::vector<int>& train_labels,
                         const Matrix& eval_reps, const std::vector<int>& eval_labels,
                         const LinearProbeOptions& options) {
  check_inputs(train_reps, train_labels, eval_reps, eval_labels);
  if (options.epochs < 0 || !(options.lr >= 0.0)) {
    throw std::invalid_argument("linear_probe: epochs and lr must be non-negative");
  }
  const int n_classes = class_count(train_labels, eval_labels);
  const Eigen::Index d = train_reps.cols();
  const double n = static_cast<double>(train_reps.rows());

  Matrix train = train_reps;
  Matrix eval = eval_reps;
  if (options.standardize) {
    const RowVector mean = train.colwise().mean();
    RowVector std = train.rows() >= 2 ? column_stds(train) : RowVector::Ones(d);
    std = std.unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
    train = (train.rowwise() - mean).array().rowwise() / std.array();
    eval = (eval.rowwise() - mean).array().rowwise() / std.array();
  }

  Matrix w = Matrix::Zero(d, n_classes);
  RowVector b = RowVector::Zero(n_classes);
  if (options.init_scale > 0.0) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, options.init_scale);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
  }

  Matrix onehot = Matrix::Zero(train.rows(), n_classes);
  for (Eigen::Index i = 0; i < train.rows(); ++i) onehot(i, train_labels[static_cast<std::size_t>(i)]) = 1.0;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    Matrix logits = (train * w).rowwise() + b;
    const Vector row_max = logits.rowwise().maxCoeff();
    logits = (logits.colwise() - row_max).array().exp();
    const Vector sums = logits.rowwise().sum();
    logits.array().colwise() /= sums.array();
    const Matrix g = (logits - onehot) / n;
    w -= options.lr * (train.transpose() * g);
    b -= options.lr * g.colwise().sum();
  }

  ProbeResult r;
  r.protocol = ProbeProtocol::kLinear;
  const Matrix scores = (eval * w).rowwise() + b;
  r.predictions.resize(static_cast<std::size_t>(eval.rows()));
  for (Eigen::Index i = 0; i < eval.rows(); ++i) {
    r.predictions[static_cast<std::size_t>(i)] = argmax_lowest(scores.row(i));
  }
  score(r, eval_labels);
  return r;
}

ProbeResult linear_probe(const Matrix& train_reps, const std::vector<int>& train_labels,
                         const Matrix& eval_reps, const std::vector<int>& eval_labels, int epochs,
                         double lr, std::uint64_t seed) {
  LinearProbeOptions o;
  o.epochs = epochs;
  o.lr = lr;
  o.seed = seed;
  return linear_probe(train_reps, train_labels, eval_reps, eval_labels, o);
}

ProbeResult knn_classify(const Matrix& train_reps, const std::vector<int>& train_labels,
                         const Matrix& eval_reps, const std::vector<int>& eval_labels, int k) {
  check_inputs(train_reps, train_labels, eval_reps, eval_labels);
  if (k < 1 || k > train_reps.rows()) {
    throw std::invalid_argument("knn_classify: k must lie in [1, n_train]");
  }
  const int n_classes = class_count(train_labels, eval_labels);
  const Matrix train = safe_normalize_rows(train_reps);
  const Matrix eval = safe_normalize_rows(eval_reps);
  const Matrix sim = eval * train.transpose();

  ProbeResult r;
  r.protocol = ProbeProtocol::kKnn;
  r.k = k;
  r.predictions.resize(static_cast<std::size_t>(eval.rows()));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.rows()));
  std::vector<int> votes(static_cast<std::size_t>(n_classes));
  for (Eigen::Index i = 0; i < eval.rows(); ++i) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](Eigen::Index a, Eigen::Index b) {
                        const double sa = sim(i, a);
                        const double sb = sim(i, b);
                        return sa > sb || (sa == sb && a < b);
                      });
    std::fill(votes.begin(), votes.end(), 0);
    for (int j = 0; j < k; ++j) ++votes[static_cast<std::size_t>(train_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])])];
    r.predictions[static_cast<std::size_t>(i)] =
        static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  score(r, eval_labels);
  return r;
}

}  // namespace vicreg
