#include "ehrd3pm/downstream.hpp"

#include <cmath>

#include "ehrd3pm/error.hpp"

namespace ehrd3pm {

namespace {

double sigmoid(double x) { return x > 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// largest eigenvalue of X^T X / n by power iteration (deterministic start)
double top_eigenvalue(const Mat& x) {
  const Index d = x.cols();
  Vec v = Vec::Ones(d).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    Vec w = x.transpose() * (x * v) / static_cast<double>(x.rows());
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    lambda = norm;
  }
  return lambda;
}

} // namespace

LogisticModel train_downstream(const Mat& features, const std::vector<int>& labels, double reg,
                               int max_iter, double tol) {
  const Index n = features.rows();
  const Index d = features.cols();
  require(n >= 2 && static_cast<Index>(labels.size()) == n, Err::ShapeMismatch,
          "need >= 2 labeled records");
  require(reg >= 0.0, Err::InvalidConfig, "regularization must be >= 0");
  Index n_pos = 0;
  for (int y : labels) n_pos += y ? 1 : 0;
  require(n_pos > 0 && n_pos < n, Err::SingleClassLabels, "both label values required");

  Vec y(n);
  for (Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;

  // Lipschitz bound of the gradient: 0.25 * lambda_max(X^T X)/n for the data
  // term (+0.25 for the intercept column) + reg
  const double lipschitz = 0.25 * (top_eigenvalue(features) + 1.0) * 1.05 + reg;
  const double step = 1.0 / lipschitz;

  LogisticModel model;
  model.weights = Vec::Zero(d);
  model.intercept = 0.0;

  for (int it = 0; it < max_iter; ++it) {
    const Vec margin = features * model.weights + Vec::Constant(n, model.intercept);
    const Vec p = margin.unaryExpr([](double m) { return sigmoid(m); });
    const Vec resid = p - y;
    Vec gw = features.transpose() * resid / static_cast<double>(n) + reg * model.weights;
    const double gb = resid.sum() / static_cast<double>(n);
    model.iterations = it + 1;
    model.grad_norm = std::sqrt(gw.squaredNorm() + gb * gb);
    if (model.grad_norm <= tol) break;
    model.weights -= step * gw;
    model.intercept -= step * gb;
  }
  return model;
}

Vec predict_proba(const LogisticModel& model, const Mat& features) {
  require(features.cols() == model.weights.size(), Err::ShapeMismatch,
          "feature width does not match model");
  Vec margin = features * model.weights + Vec::Constant(features.rows(), model.intercept);
  return margin.unaryExpr([](double m) { return sigmoid(m); });
}

void split_features(const CodeMatrix& m, int target_code, Mat& features, std::vector<int>& labels) {
  require(target_code >= 0 && target_code < m.n_codes, Err::IndexOutOfRange,
          "target code out of range");
  features.resize(m.n_records, m.n_codes - 1);
  labels.assign(static_cast<std::size_t>(m.n_records), 0);
  for (Index r = 0; r < m.n_records; ++r) {
    Index out = 0;
    for (Index c = 0; c < m.n_codes; ++c) {
      if (c == target_code) {
        labels[static_cast<std::size_t>(r)] = m.bits(r, c) ? 1 : 0;
        continue;
      }
      features(r, out++) = static_cast<double>(m.bits(r, c));
    }
  }
}

} // namespace ehrd3pm
