#pragma once

#include "ehrd3pm/rng.hpp"
#include "ehrd3pm/schedule.hpp"
#include "ehrd3pm/types.hpp"

namespace ehrd3pm {

// Per-record, per-token probability rows over K categories, stacked so that
// (record r, token i) lives at row r*n_tokens + i.
struct CategoricalField {
  Index n_records = 0;
  Index n_tokens = 0;
  Index k = 0;
  Mat probs; // (n_records*n_tokens) x k

  Mat::RowXpr row(Index record, Index token) { return probs.row(record * n_tokens + token); }
  Mat::ConstRowXpr row(Index record, Index token) const {
    return probs.row(record * n_tokens + token);
  }

  static CategoricalField zeros(Index n_records, Index n_tokens, Index k);
  // throws unless every row is non-negative and sums to 1 within 1e-9
  void validate() const;
};

struct ElboBreakdown {
  double l0 = 0.0;            // reconstruction term, only at t = 1
  double lt = 0.0;            // KL term at the sampled step, only at t >= 2
  double lT_diagnostic = 0.0; // prior KL, excluded from gradients
  int t_sampled = 0;
  double total_negative_elbo = 0.0; // T * (term at sampled t), single-sample estimator
};

// KL(p || q) in nats over probability rows, with 0*log0 := 0 and a 1e-12
// floor inside logs.
double categorical_kl(const RowVec& p, const RowVec& q);

// q(x_t = . | x_{t-1}): beta_t mass on the previous token, rest uniform.
CategoricalField forward_kernel(const TokenMatrix& x_prev, double beta_t, int k);

// closed-form q(x_t = . | x_0) with retention alpha_bar_t
CategoricalField forward_marginal(const TokenMatrix& x0, double alpha_bar_t, int k);

TokenMatrix sample_field(const CategoricalField& field, Rng& rng);
TokenMatrix sample_forward(const TokenMatrix& x0, int t, const Schedule& schedule, int k, Rng& rng);

// Bayes posterior q(x_{t-1} = . | x_t, x_0); valid for 2 <= t <= T.
CategoricalField posterior(const TokenMatrix& x_t, const TokenMatrix& x0, int t,
                           const Schedule& schedule, int k);

// p(x_{t-1} = . | x_t) = sum_c q(x_{t-1} | x_t, e_c) * predictor(e_c | x_t)
CategoricalField reverse_mixture(const TokenMatrix& x_t, const CategoricalField& predictor, int t,
                                 const Schedule& schedule);

// Single-record negative-ELBO term at a sampled step. predictor_probs is the
// record's N x k head output.
ElboBreakdown elbo_loss(const TokenRow& x0, int t, const TokenRow& x_t, const Mat& predictor_probs,
                        const Schedule& schedule);

// Training path: term value plus its gradient with respect to the predictor
// probabilities (same N x k shape). The T multiplier and batch mean are left
// to the caller.
double elbo_term_grad(const TokenRow& x0, int t, const TokenRow& x_t, const Mat& predictor_probs,
                      const Schedule& schedule, Mat& dpredictor);

} // namespace ehrd3pm
