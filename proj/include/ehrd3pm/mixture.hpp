#pragma once

#include <cstdint>

#include "ehrd3pm/code_matrix.hpp"
#include "ehrd3pm/types.hpp"

namespace ehrd3pm {

// Bernoulli mixture with closed-form moments; the synthetic stand-in for a
// clinical corpus.
struct MixtureSpec {
  Vec weights; // M, non-negative, sums to 1 within 1e-12
  Mat probs;   // M x N per-component Bernoulli probabilities

  Index components() const { return weights.size(); }
  Index n_codes() const { return probs.cols(); }
  void validate() const;
};

struct GroundTruth {
  CodeMatrix data;
  Vec prevalence; // analytic
  Mat covariance; // analytic
};

GroundTruth gen_ground_truth(const MixtureSpec& spec, Index n, std::uint64_t seed);

Vec mixture_prevalence(const MixtureSpec& spec);
Mat mixture_covariance(const MixtureSpec& spec);
// P(code j present | code k present), j loops over all codes (entry k is 1)
Vec conditional_prevalence(const MixtureSpec& spec, int code_k);

// samples from independent Bernoulli at the given prevalence; the correlation-
// free baseline matched on marginals
CodeMatrix sample_independent(const Vec& prevalence, Index n, std::uint64_t seed);

} // namespace ehrd3pm
