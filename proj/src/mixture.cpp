#include "ehrd3pm/mixture.hpp"

#include <cmath>

#include "ehrd3pm/error.hpp"
#include "ehrd3pm/rng.hpp"

namespace ehrd3pm {

void MixtureSpec::validate() const {
  require(weights.size() >= 1, Err::InvalidSpec, "need at least one component");
  require(probs.rows() == weights.size(), Err::InvalidSpec, "one probability row per component");
  require(probs.cols() >= 1, Err::InvalidSpec, "need at least one code");
  double sum = 0.0;
  for (Index m = 0; m < weights.size(); ++m) {
    require(weights[m] >= 0.0, Err::InvalidSpec, "negative mixture weight");
    sum += weights[m];
  }
  require(std::abs(sum - 1.0) <= 1e-12, Err::InvalidSpec, "weights must sum to 1");
  for (Index m = 0; m < probs.rows(); ++m)
    for (Index c = 0; c < probs.cols(); ++c)
      require(probs(m, c) >= 0.0 && probs(m, c) <= 1.0, Err::InvalidSpec,
              "Bernoulli probability outside [0,1]");
}

Vec mixture_prevalence(const MixtureSpec& spec) {
  return spec.probs.transpose() * spec.weights;
}

Mat mixture_covariance(const MixtureSpec& spec) {
  const Vec p = mixture_prevalence(spec);
  // E[x_i x_j] = sum_m w_m q_mi q_mj for i != j; diagonal is p_i
  Mat second = spec.probs.transpose() * spec.weights.asDiagonal() * spec.probs;
  Mat cov = second - p * p.transpose();
  for (Index i = 0; i < p.size(); ++i) cov(i, i) = p[i] * (1.0 - p[i]);
  return cov;
}

Vec conditional_prevalence(const MixtureSpec& spec, int code_k) {
  require(code_k >= 0 && code_k < spec.n_codes(), Err::IndexOutOfRange, "code out of range");
  const Index n = spec.n_codes();
  double pk = 0.0;
  for (Index m = 0; m < spec.components(); ++m) pk += spec.weights[m] * spec.probs(m, code_k);
  require(pk > 0.0, Err::InvalidSpec, "conditioning code has zero prevalence");
  Vec cond = Vec::Zero(n);
  for (Index j = 0; j < n; ++j) {
    double joint = 0.0;
    for (Index m = 0; m < spec.components(); ++m) {
      const double pj_given_m = j == code_k ? 1.0 : spec.probs(m, j);
      joint += spec.weights[m] * spec.probs(m, code_k) * pj_given_m;
    }
    cond[j] = joint / pk;
  }
  return cond;
}

GroundTruth gen_ground_truth(const MixtureSpec& spec, Index n, std::uint64_t seed) {
  spec.validate();
  require(n >= 1, Err::InvalidSpec, "need at least one record");

  GroundTruth gt;
  gt.prevalence = mixture_prevalence(spec);
  gt.covariance = mixture_covariance(spec);
  gt.data.n_records = n;
  gt.data.n_codes = spec.n_codes();
  gt.data.bits.resize(n, spec.n_codes());

  Rng rng(derive_seed(seed, 0x31A7));
  std::vector<double> w(static_cast<std::size_t>(spec.components()));
  for (Index m = 0; m < spec.components(); ++m) w[static_cast<std::size_t>(m)] = spec.weights[m];
  for (Index r = 0; r < n; ++r) {
    const int m = rng.categorical(w.data(), static_cast<int>(spec.components()));
    for (Index c = 0; c < spec.n_codes(); ++c)
      gt.data.bits(r, c) = rng.uniform01() < spec.probs(m, c) ? 1 : 0;
  }
  return gt;
}

CodeMatrix sample_independent(const Vec& prevalence, Index n, std::uint64_t seed) {
  require(n >= 1, Err::InvalidSpec, "need at least one record");
  CodeMatrix m;
  m.n_records = n;
  m.n_codes = prevalence.size();
  m.bits.resize(n, m.n_codes);
  Rng rng(derive_seed(seed, 0x17D3));
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < m.n_codes; ++c) m.bits(r, c) = rng.uniform01() < prevalence[c] ? 1 : 0;
  return m;
}

} // namespace ehrd3pm
