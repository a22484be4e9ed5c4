#include "ehrd3pm/optimizer.hpp"

#include <cmath>

#include "ehrd3pm/error.hpp"

namespace ehrd3pm {

AdamState make_adam_state(const DenoiserParams& params) {
  AdamState state;
  state.m = params.zeros_like();
  state.v = params.zeros_like();
  state.step = 0;
  return state;
}

void adamw_update_tensor(Mat& param, const Mat& grad, Mat& m, Mat& v, std::int64_t step,
                         const AdamHyper& hyper) {
  require(param.rows() == grad.rows() && param.cols() == grad.cols() &&
              param.rows() == m.rows() && param.cols() == m.cols() &&
              param.rows() == v.rows() && param.cols() == v.cols(),
          Err::ShapeMismatch, "optimizer tensor shapes disagree");
  if (!grad.allFinite()) throw_numeric(Err::NonFiniteGradient, "non-finite gradient");

  m = hyper.beta1 * m + (1.0 - hyper.beta1) * grad;
  v = (hyper.beta2 * v.array() + (1.0 - hyper.beta2) * grad.array().square()).matrix();
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  param -= hyper.lr * ((m.array() / bc1) / ((v.array() / bc2).sqrt() + hyper.eps) +
                       hyper.weight_decay * param.array())
                          .matrix();
}

void optimizer_step(DenoiserParams& params, const DenoiserParams& grads, AdamState& state,
                    const AdamHyper& hyper) {
  ++state.step;
  std::vector<Mat*> p, g, m, v;
  for_each_tensor(params, [&](Mat& t) { p.push_back(&t); });
  for_each_tensor(const_cast<DenoiserParams&>(grads), [&](Mat& t) { g.push_back(&t); });
  for_each_tensor(state.m, [&](Mat& t) { m.push_back(&t); });
  for_each_tensor(state.v, [&](Mat& t) { v.push_back(&t); });
  require(p.size() == g.size() && p.size() == m.size() && p.size() == v.size(),
          Err::ShapeMismatch, "parameter/gradient tensor lists differ");
  for (std::size_t i = 0; i < p.size(); ++i)
    adamw_update_tensor(*p[i], *g[i], *m[i], *v[i], state.step, hyper);
}

double grad_global_norm(const DenoiserParams& grads) {
  double sq = 0.0;
  for_each_tensor(const_cast<DenoiserParams&>(grads), [&](Mat& t) { sq += t.squaredNorm(); });
  return std::sqrt(sq);
}

double clip_global_norm(DenoiserParams& grads, double max_norm) {
  const double norm = grad_global_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for_each_tensor(grads, [&](Mat& t) { t *= scale; });
  }
  return norm;
}

} // namespace ehrd3pm
