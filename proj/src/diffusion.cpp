#include "ehrd3pm/diffusion.hpp"

#include <cmath>
#include <vector>

#include "ehrd3pm/error.hpp"

namespace ehrd3pm {

namespace {

constexpr double kLogFloor = 1e-12;

double floored_log(double x) { return std::log(x < kLogFloor ? kLogFloor : x); }

void check_tokens(const TokenMatrix& tokens, int k) {
  for (Index r = 0; r < tokens.rows(); ++r)
    for (Index i = 0; i < tokens.cols(); ++i)
      require(tokens(r, i) >= 0 && tokens(r, i) < k, Err::NotOneHot,
              "token category outside [0,K)");
}

void check_step(int t, const Schedule& schedule, int lo) {
  require(t >= lo && t <= schedule.horizon, Err::StepOutOfRange,
          "step " + std::to_string(t) + " outside [" + std::to_string(lo) + "," +
              std::to_string(schedule.horizon) + "]");
}

// probability row of q(x_t | x_{t-1} = e_c): retention mass on c, rest uniform
inline void mix_row(double keep, int cat, Index k, double* out) {
  const double base = (1.0 - keep) / static_cast<double>(k);
  for (Index j = 0; j < k; ++j) out[j] = base;
  out[cat] += keep;
}

} // namespace

CategoricalField CategoricalField::zeros(Index n_records, Index n_tokens, Index k) {
  CategoricalField f;
  f.n_records = n_records;
  f.n_tokens = n_tokens;
  f.k = k;
  f.probs = Mat::Zero(n_records * n_tokens, k);
  return f;
}

void CategoricalField::validate() const {
  for (Index r = 0; r < probs.rows(); ++r) {
    double sum = 0.0;
    for (Index j = 0; j < k; ++j) {
      require(probs(r, j) >= 0.0, Err::UnnormalizedPredictor, "negative probability");
      sum += probs(r, j);
    }
    require(std::abs(sum - 1.0) <= 1e-9, Err::UnnormalizedPredictor,
            "row sum deviates from 1 by more than 1e-9");
  }
}

double categorical_kl(const RowVec& p, const RowVec& q) {
  double kl = 0.0;
  for (Index j = 0; j < p.size(); ++j) {
    if (p[j] <= 0.0) continue;
    kl += p[j] * (floored_log(p[j]) - floored_log(q[j]));
  }
  return kl;
}

CategoricalField forward_kernel(const TokenMatrix& x_prev, double beta_t, int k) {
  require(beta_t >= 0.0 && beta_t <= 1.0, Err::InvalidConfig, "beta outside [0,1]");
  check_tokens(x_prev, k);
  CategoricalField f = CategoricalField::zeros(x_prev.rows(), x_prev.cols(), k);
  const double base = (1.0 - beta_t) / static_cast<double>(k);
  f.probs.setConstant(base);
  for (Index r = 0; r < x_prev.rows(); ++r)
    for (Index i = 0; i < x_prev.cols(); ++i)
      f.probs(r * x_prev.cols() + i, x_prev(r, i)) += beta_t;
  return f;
}

CategoricalField forward_marginal(const TokenMatrix& x0, double alpha_bar_t, int k) {
  require(alpha_bar_t >= 0.0 && alpha_bar_t <= 1.0, Err::InvalidConfig, "alpha_bar outside [0,1]");
  return forward_kernel(x0, alpha_bar_t, k);
}

TokenMatrix sample_field(const CategoricalField& field, Rng& rng) {
  TokenMatrix out(field.n_records, field.n_tokens);
  for (Index r = 0; r < field.n_records; ++r)
    for (Index i = 0; i < field.n_tokens; ++i)
      out(r, i) = rng.categorical(field.probs.row(r * field.n_tokens + i).data(),
                                  static_cast<int>(field.k));
  return out;
}

TokenMatrix sample_forward(const TokenMatrix& x0, int t, const Schedule& schedule, int k,
                           Rng& rng) {
  check_step(t, schedule, 1);
  const CategoricalField marg = forward_marginal(x0, schedule.abar(t), k);
  return sample_field(marg, rng);
}

CategoricalField posterior(const TokenMatrix& x_t, const TokenMatrix& x0, int t,
                           const Schedule& schedule, int k) {
  check_step(t, schedule, 2);
  require(x_t.rows() == x0.rows() && x_t.cols() == x0.cols(), Err::ShapeMismatch,
          "x_t and x0 shapes differ");
  check_tokens(x_t, k);
  check_tokens(x0, k);

  const double beta = schedule.beta(t);
  const double abar_prev = schedule.abar(t - 1);
  const double kernel_base = (1.0 - beta) / static_cast<double>(k);
  const double marg_base = (1.0 - abar_prev) / static_cast<double>(k);

  CategoricalField f = CategoricalField::zeros(x_t.rows(), x_t.cols(), k);
  for (Index r = 0; r < x_t.rows(); ++r)
    for (Index i = 0; i < x_t.cols(); ++i) {
      const Index row = r * x_t.cols() + i;
      double sum = 0.0;
      for (Index j = 0; j < k; ++j) {
        const double lik = kernel_base + (j == x_t(r, i) ? beta : 0.0);
        const double prior = marg_base + (j == x0(r, i) ? abar_prev : 0.0);
        const double num = lik * prior;
        f.probs(row, j) = num;
        sum += num;
      }
      f.probs.row(row) /= sum;
    }
  return f;
}

CategoricalField reverse_mixture(const TokenMatrix& x_t, const CategoricalField& predictor,
                                 int t, const Schedule& schedule) {
  check_step(t, schedule, 2);
  const Index k = predictor.k;
  require(x_t.rows() == predictor.n_records && x_t.cols() == predictor.n_tokens,
          Err::ShapeMismatch, "predictor and x_t shapes differ");
  check_tokens(x_t, static_cast<int>(k));

  const double beta = schedule.beta(t);
  const double abar_prev = schedule.abar(t - 1);
  const double kernel_base = (1.0 - beta) / static_cast<double>(k);
  const double marg_base = (1.0 - abar_prev) / static_cast<double>(k);

  CategoricalField f = CategoricalField::zeros(x_t.rows(), x_t.cols(), k);
  Vec lik(k), z(k);
  for (Index r = 0; r < x_t.rows(); ++r)
    for (Index i = 0; i < x_t.cols(); ++i) {
      const Index row = r * x_t.cols() + i;
      const auto pred = predictor.probs.row(row);
      const double psum = pred.sum();
      require(std::abs(psum - 1.0) <= 1e-6, Err::UnnormalizedPredictor,
              "predictor row sum deviates from 1 by more than 1e-6");

      for (Index j = 0; j < k; ++j) lik[j] = kernel_base + (j == x_t(r, i) ? beta : 0.0);
      // normalizer of the posterior for x0 = e_c equals q(x_t | x0 = e_c)
      for (Index c = 0; c < k; ++c) z[c] = abar_prev * lik[c] + marg_base;

      double weighted = 0.0; // sum_c pred_c / z_c
      for (Index c = 0; c < k; ++c) weighted += pred[c] / z[c];
      double rowsum = 0.0;
      for (Index j = 0; j < k; ++j) {
        const double v = lik[j] * (marg_base * weighted + abar_prev * pred[j] / z[j]);
        f.probs(row, j) = v;
        rowsum += v;
      }
      f.probs.row(row) /= rowsum;
    }
  return f;
}

namespace {

// posterior over x_{t-1} for a single token given x_t category and an assumed
// clean category c; writes the normalized K-row into out
void token_posterior(int xt_cat, int c, double beta, double abar_prev, Index k, double* out) {
  const double kernel_base = (1.0 - beta) / static_cast<double>(k);
  const double marg_base = (1.0 - abar_prev) / static_cast<double>(k);
  double sum = 0.0;
  for (Index j = 0; j < k; ++j) {
    const double lik = kernel_base + (j == xt_cat ? beta : 0.0);
    const double prior = marg_base + (j == c ? abar_prev : 0.0);
    out[j] = lik * prior;
    sum += out[j];
  }
  for (Index j = 0; j < k; ++j) out[j] /= sum;
}

} // namespace

ElboBreakdown elbo_loss(const TokenRow& x0, int t, const TokenRow& x_t, const Mat& predictor_probs,
                        const Schedule& schedule) {
  Mat unused;
  ElboBreakdown b;
  b.t_sampled = t;
  const double term = elbo_term_grad(x0, t, x_t, predictor_probs, schedule, unused);
  if (t == 1)
    b.l0 = term;
  else
    b.lt = term;
  b.total_negative_elbo = static_cast<double>(schedule.horizon) * term;

  // prior KL against the uniform row, summed over tokens
  const Index k = predictor_probs.cols();
  const double abar_T = schedule.abar(static_cast<int>(schedule.horizon));
  const double uniform = 1.0 / static_cast<double>(k);
  RowVec q = RowVec::Constant(k, uniform);
  RowVec marg(k);
  for (Index i = 0; i < x0.size(); ++i) {
    for (Index j = 0; j < k; ++j)
      marg[j] = (1.0 - abar_T) / static_cast<double>(k) + (j == x0[i] ? abar_T : 0.0);
    b.lT_diagnostic += categorical_kl(marg, q);
  }
  return b;
}

double elbo_term_grad(const TokenRow& x0, int t, const TokenRow& x_t, const Mat& predictor_probs,
                      const Schedule& schedule, Mat& dpredictor) {
  check_step(t, schedule, 1);
  const Index n = x0.size();
  const Index k = predictor_probs.cols();
  require(x_t.size() == n && predictor_probs.rows() == n, Err::ShapeMismatch,
          "token/predictor shapes differ");

  dpredictor = Mat::Zero(n, k);

  if (t == 1) {
    double l0 = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double p = predictor_probs(i, x0[i]);
      l0 -= floored_log(p);
      dpredictor(i, x0[i]) = -1.0 / (p < kLogFloor ? kLogFloor : p);
    }
    return l0;
  }

  const double beta = schedule.beta(t);
  const double abar_prev = schedule.abar(t - 1);
  double lt = 0.0;
  std::vector<double> post(static_cast<std::size_t>(k));
  Mat cond(k, k); // cond(j, c) = posterior_j assuming clean category c
  Vec mix(k);
  for (Index i = 0; i < n; ++i) {
    token_posterior(x_t[i], x0[i], beta, abar_prev, k, post.data());
    for (Index c = 0; c < k; ++c) {
      Vec col(k);
      token_posterior(x_t[i], static_cast<int>(c), beta, abar_prev, k, col.data());
      cond.col(c) = col;
    }
    mix.noalias() = cond * predictor_probs.row(i).transpose();

    for (Index j = 0; j < k; ++j) {
      if (post[static_cast<std::size_t>(j)] <= 0.0) continue;
      const double pj = post[static_cast<std::size_t>(j)];
      lt += pj * (floored_log(pj) - floored_log(mix[j]));
    }
    for (Index c = 0; c < k; ++c) {
      double g = 0.0;
      for (Index j = 0; j < k; ++j) {
        const double pj = post[static_cast<std::size_t>(j)];
        if (pj <= 0.0) continue;
        g -= pj / (mix[j] < kLogFloor ? kLogFloor : mix[j]) * cond(j, c);
      }
      dpredictor(i, c) = g;
    }
  }
  return lt;
}

} // namespace ehrd3pm
