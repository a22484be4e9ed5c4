#pragma once

#include <vector>

#include "ehrd3pm/code_matrix.hpp"
#include "ehrd3pm/types.hpp"

namespace ehrd3pm {

struct LogisticModel {
  Vec weights;
  double intercept = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
};

// L2-regularized logistic regression (intercept unpenalized), fit by
// deterministic full-batch gradient descent with a 1/L step until the
// gradient norm drops to tol or max_iter is hit.
LogisticModel train_downstream(const Mat& features, const std::vector<int>& labels, double reg,
                               int max_iter = 5000, double tol = 1e-6);

Vec predict_proba(const LogisticModel& model, const Mat& features);

// features = all columns except target_code, labels = target_code column
void split_features(const CodeMatrix& m, int target_code, Mat& features, std::vector<int>& labels);

} // namespace ehrd3pm
