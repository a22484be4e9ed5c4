#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ehrd3pm/checkpoint.hpp"
#include "ehrd3pm/code_matrix.hpp"
#include "ehrd3pm/rng.hpp"

namespace ehrd3pm {

// Differentiable scorer over token-marginal probability matrices (N x K):
// returns p(context | marginals) in (0, 1].
struct TokenMarginalScorer {
  virtual ~TokenMarginalScorer() = default;
  virtual double score(const Mat& marginals) const = 0;
  virtual Mat score_grad(const Mat& marginals) const = 0;
};

// Context: a conjunction of code-presence constraints (energies add), an
// optional soft classifier, or both.
struct ContextSpec {
  std::vector<int> presence_codes;
  std::shared_ptr<const TokenMarginalScorer> scorer;

  static ContextSpec code_presence(int code) { return {{code}, nullptr}; }
  static ContextSpec code_presence(std::vector<int> codes) { return {std::move(codes), nullptr}; }
  static ContextSpec soft(std::shared_ptr<const TokenMarginalScorer> s) {
    return {{}, std::move(s)};
  }
  void validate(Index n_codes) const;
};

enum class ClassifierEstimate {
  MeanField,  // evaluate the scorer on the token-marginal matrix
  MonteCarlo, // score-function estimate over categorical draws from the head
};

struct GuidanceConfig {
  int steps = 10;
  double eta = 0.1;
  double lambda = 0.01;
  double tau = 0.0;
  ClassifierEstimate classifier_estimate = ClassifierEstimate::MeanField;
  int mc_samples = 64;

  void validate() const;
};

// V(z) = log p(context | head(z)); differentiable in the latent, gradients
// flow through the softmax head only.
double energy(const Mat& z_latent, const DenoiserParams& params, const ContextSpec& context);

// lambda * sum_tokens KL(head(z_current) || head(z_anchor)), anchor constant
double kl_regularizer(const Mat& z_current, const Mat& z_anchor, const DenoiserParams& params,
                      double lambda);

// y <- y - eta * grad[D_KL(y) - V(y)] + sqrt(2 eta tau) eps, started at z_L
Mat langevin_refine(const Mat& z_latent, const DenoiserParams& params, const ContextSpec& context,
                    const GuidanceConfig& config, Rng& rng);

CodeMatrix sample_unconditional(const Checkpoint& ckpt, Index n, Rng rng, int threads = 0);

CodeMatrix sample_guided(const Checkpoint& ckpt, const ContextSpec& context, Index n,
                         const GuidanceConfig& config, Rng rng, int threads = 0);

// Reverse chain with an injectable predictor: the callback maps a chunk of
// states x_t (records [offset, offset+rows)) at step t to head probabilities
// ((rows*N) x K); streams holds one generator per record for the whole run.
using PredictorFn =
    std::function<Mat(const TokenMatrix& x_chunk, int t, Index record_offset, std::vector<Rng>& streams)>;
CodeMatrix reverse_chain(const Schedule& schedule, Index n_records, Index n_tokens, int k, Rng rng,
                         const PredictorFn& predictor, int threads = 0, Index chunk = 1024);

} // namespace ehrd3pm
