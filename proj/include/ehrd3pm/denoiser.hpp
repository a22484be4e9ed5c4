#pragma once

#include <cstdint>
#include <vector>

#include "ehrd3pm/diffusion.hpp"
#include "ehrd3pm/rng.hpp"
#include "ehrd3pm/types.hpp"

namespace ehrd3pm {

enum class PositionalKind {
  Full,     // dense n_tokens x hidden table
  Axial,    // row table + column table over an axial_rows x axial_cols grid
  Category, // hidden table indexed by the input token category (K x hidden)
};

enum class TimeInjection { EveryLayer, FirstLayer };

struct DenoiserConfig {
  int n_tokens = 0;  // N
  int categories = 2; // K
  int hidden = 64;    // D
  int layers = 2;     // L
  int heads = 4;      // H
  int proj = 16;      // P, token-axis projection length for keys/values
  int ff_hidden = 0;  // 0 -> 4*hidden
  PositionalKind pos_kind = PositionalKind::Full;
  int axial_rows = 0; // n1
  int axial_cols = 0; // n2, axial needs n1*n2 >= n_tokens
  bool shared_head = true;
  TimeInjection time_injection = TimeInjection::EveryLayer;
  double ln_eps = 1e-5;

  int ff() const { return ff_hidden > 0 ? ff_hidden : 4 * hidden; }
  void validate() const;
};

struct AttentionParams {
  Mat wq, wk, wv, wo; // hidden x hidden
  Mat proj_k, proj_v; // n_tokens x proj, shared across heads within the layer
};

struct TimeMlpParams {
  Mat w1, b1; // hidden x hidden, hidden x 1; Softplus after the first affine
  Mat w2, b2;
};

struct FfnParams {
  Mat w1, b1; // hidden x ff, ff x 1
  Mat w2, b2; // ff x hidden, hidden x 1
};

struct LayerParams {
  TimeMlpParams time_mlp;
  AttentionParams attn;
  FfnParams ffn;
};

struct DenoiserParams {
  DenoiserConfig config;
  Mat token_embed;        // K x D
  Mat pos_full;           // N x D (Full)
  Mat pos_row, pos_col;   // n1 x D, n2 x D (Axial)
  Mat pos_cat;            // K x D (Category)
  std::vector<LayerParams> layers;
  Mat head;               // D x K shared, or (N*D) x K with position i at rows [i*D, (i+1)*D)

  // zero-filled clone with identical shapes (gradients, optimizer moments)
  DenoiserParams zeros_like() const;
};

// Visits every tensor in declared order; the same order fixes the checkpoint
// tensor layout and all deterministic reductions.
template <class P, class F>
void for_each_tensor(P&& params, F&& fn) {
  fn(params.token_embed);
  switch (params.config.pos_kind) {
    case PositionalKind::Full: fn(params.pos_full); break;
    case PositionalKind::Axial:
      fn(params.pos_row);
      fn(params.pos_col);
      break;
    case PositionalKind::Category: fn(params.pos_cat); break;
  }
  for (auto& layer : params.layers) {
    fn(layer.time_mlp.w1);
    fn(layer.time_mlp.b1);
    fn(layer.time_mlp.w2);
    fn(layer.time_mlp.b2);
    fn(layer.attn.wq);
    fn(layer.attn.wk);
    fn(layer.attn.wv);
    fn(layer.attn.wo);
    fn(layer.attn.proj_k);
    fn(layer.attn.proj_v);
    fn(layer.ffn.w1);
    fn(layer.ffn.b1);
    fn(layer.ffn.w2);
    fn(layer.ffn.b2);
  }
  fn(params.head);
}

template <class Pa, class Pb, class F>
void for_each_tensor_pair(Pa&& a, Pb&& b, F&& fn) {
  std::vector<Mat*> ta, tb;
  for_each_tensor(a, [&](auto& m) { ta.push_back(const_cast<Mat*>(&m)); });
  for_each_tensor(b, [&](auto& m) { tb.push_back(const_cast<Mat*>(&m)); });
  for (std::size_t i = 0; i < ta.size(); ++i) fn(*ta[i], *tb[i]);
}

std::int64_t parameter_count(const DenoiserConfig& config);

DenoiserParams init_params(const DenoiserConfig& config, std::uint64_t seed);

// sinusoidal features: component 2i = sin(t*w_i), 2i+1 = cos(t*w_i),
// w_i = 10000^(-2i/width); t = 0 permitted as a reference point
Vec time_embedding(int t, int width, int horizon);

struct LayerTrace {
  Mat ln1;            // (n*N) x D, normalized attention input
  Vec ln1_mean, ln1_rstd;
  Mat q, k, v;        // (n*N) x D
  Mat kp, vp;         // (n*P) x D, projected keys/values stacked per record
  Mat attn;           // ((n*H)*N) x P, softmax weights; record r head h at rows ((r*H+h)*N)..
  Mat attn_out;       // (n*N) x D, concatenated head outputs before wo
  Mat ln2;            // (n*N) x D, normalized feed-forward input
  Vec ln2_mean, ln2_rstd;
  Mat ffn_u, ffn_h;   // (n*N) x F, pre/post activation
  Mat time_u, time_h; // n x D, time-MLP intermediates per record
  Mat time_vec;       // n x D
};

struct ForwardTrace {
  Index n_records = 0;
  Index n_tokens = 0;
  Index k = 0;
  std::vector<int> t; // per record
  TokenMatrix tokens;
  Mat sinus;          // n x D sinusoidal time features
  Mat z0;             // embedding output (cache only)
  std::vector<LayerTrace> layers; // empty when built without cache
  Mat z_final;        // (n*N) x D, the guidance latent
  Mat logits;         // (n*N) x K
  CategoricalField probs() const;
  Mat probs_matrix;   // (n*N) x K
};

// Full forward pass; keep_cache=false skips every intermediate not needed to
// produce probabilities and the final latent.
ForwardTrace forward(const DenoiserParams& params, const TokenMatrix& x_t,
                     const std::vector<int>& t_per_record, bool keep_cache = true);
ForwardTrace forward(const DenoiserParams& params, const TokenMatrix& x_t, int t,
                     bool keep_cache = true);

// Accumulates gradients of a scalar loss into grads, given d(loss)/d(probs).
void backward(const DenoiserParams& params, const ForwardTrace& trace, const Mat& dprobs,
              DenoiserParams& grads);

// softmax head only: latent (N x D rows for one record) -> probability rows
Mat head_logits(const DenoiserParams& params, const Mat& z_latent);
Mat head_probs(const DenoiserParams& params, const Mat& z_latent);

struct LossResult {
  double loss = 0.0;
  DenoiserParams grads;
};

// Single-sample ELBO estimator over a batch: per record draws t uniform in
// {1..T} and x_t from the forward marginal, then returns exact reverse-mode
// gradients of mean_r T * term_r. noise_rngs supplies one stream per record.
LossResult loss_and_grad(const DenoiserParams& params, const TokenMatrix& batch,
                         const Schedule& schedule, std::vector<Rng>& noise_rngs,
                         int threads = 1);

// token-axis multiply count implied by the actually materialized attention
// tensors of a cached trace; used to check the O(N*P) scaling claim
std::int64_t attention_token_ops(const ForwardTrace& trace, const DenoiserConfig& config);

} // namespace ehrd3pm
