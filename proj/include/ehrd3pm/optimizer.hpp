#pragma once

#include <cstdint>

#include "ehrd3pm/denoiser.hpp"
#include "ehrd3pm/types.hpp"

namespace ehrd3pm {

// Decoupled-weight-decay adaptive moment estimation.
struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

struct AdamState {
  DenoiserParams m;
  DenoiserParams v;
  std::int64_t step = 0;
};

AdamState make_adam_state(const DenoiserParams& params);

// One tensor: moments updated with 0.9/0.999, bias corrected, then
// p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p). step is the 1-based count
// after this update.
void adamw_update_tensor(Mat& param, const Mat& grad, Mat& m, Mat& v, std::int64_t step,
                         const AdamHyper& hyper);

void optimizer_step(DenoiserParams& params, const DenoiserParams& grads, AdamState& state,
                    const AdamHyper& hyper);

// Scales all gradients so the global L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(DenoiserParams& grads, double max_norm);

double grad_global_norm(const DenoiserParams& grads);

} // namespace ehrd3pm
