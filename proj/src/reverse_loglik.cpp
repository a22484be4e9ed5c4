#include "ehrd3pm/reverse_loglik.hpp"

#include <cmath>
#include <vector>

#include "ehrd3pm/diffusion.hpp"
#include "ehrd3pm/error.hpp"

namespace ehrd3pm {

namespace {

void check_limits(const DenoiserConfig& cfg, const Schedule& schedule) {
  require(cfg.n_tokens <= 2 && schedule.horizon <= 3 && cfg.categories == 2,
          Err::InstanceTooLarge, "enumeration limits are N <= 2, T <= 3, K = 2");
}

// all K^N token rows
std::vector<TokenRow> enumerate_states(Index n_tokens, int k) {
  std::vector<TokenRow> states;
  const Index count = static_cast<Index>(std::pow(static_cast<double>(k), static_cast<double>(n_tokens)));
  for (Index s = 0; s < count; ++s) {
    TokenRow row(n_tokens);
    Index rem = s;
    for (Index i = 0; i < n_tokens; ++i) {
      row[i] = static_cast<int>(rem % k);
      rem /= k;
    }
    states.push_back(row);
  }
  return states;
}

// per-state reverse transition table: probs[s](i, c) with rows normalized
std::vector<Mat> reverse_tables(const Checkpoint& ckpt, const std::vector<TokenRow>& states,
                                int t, bool mixture) {
  const auto& cfg = ckpt.config();
  std::vector<Mat> tables;
  tables.reserve(states.size());
  for (const TokenRow& s : states) {
    TokenMatrix x(1, cfg.n_tokens);
    x.row(0) = s;
    const ForwardTrace trace = forward(ckpt.params, x, t, false);
    if (!mixture) {
      tables.push_back(trace.probs_matrix);
      continue;
    }
    const CategoricalField mix = reverse_mixture(x, trace.probs(), t, ckpt.schedule);
    tables.push_back(mix.probs);
  }
  return tables;
}

double row_prob(const Mat& table, const TokenRow& next) {
  double p = 1.0;
  for (Index i = 0; i < next.size(); ++i) p *= table(i, next[i]);
  return p;
}

} // namespace

double exact_reverse_loglik(const Checkpoint& ckpt, const TokenRow& x0) {
  const auto& cfg = ckpt.config();
  check_limits(cfg, ckpt.schedule);
  require(x0.size() == cfg.n_tokens, Err::ShapeMismatch, "x0 length mismatch");

  const int T = static_cast<int>(ckpt.schedule.horizon);
  const int k = cfg.categories;
  const std::vector<TokenRow> states = enumerate_states(cfg.n_tokens, k);
  const double prior = std::pow(1.0 / static_cast<double>(k), static_cast<double>(cfg.n_tokens));

  // per step: mixture transitions for t >= 2, the raw head at t = 1
  std::vector<std::vector<Mat>> step_tables(static_cast<std::size_t>(T + 1));
  for (int t = 1; t <= T; ++t)
    step_tables[static_cast<std::size_t>(t)] = reverse_tables(ckpt, states, t, t >= 2);

  // brute-force sum over all (K^N)^T trajectories
  std::vector<std::size_t> traj(static_cast<std::size_t>(T), 0);
  double total = 0.0;
  const std::size_t n_states = states.size();
  while (true) {
    // traj[t-1] is the state index of x_t
    double p = prior;
    for (int t = T; t >= 2; --t)
      p *= row_prob(step_tables[static_cast<std::size_t>(t)][traj[static_cast<std::size_t>(t - 1)]],
                    states[traj[static_cast<std::size_t>(t - 2)]]);
    p *= row_prob(step_tables[1][traj[0]], x0);
    total += p;

    std::size_t pos = 0;
    while (pos < traj.size() && ++traj[pos] == n_states) {
      traj[pos] = 0;
      ++pos;
    }
    if (pos == traj.size()) break;
  }
  return std::log(total);
}

double exact_negative_elbo(const Checkpoint& ckpt, const TokenRow& x0) {
  const auto& cfg = ckpt.config();
  check_limits(cfg, ckpt.schedule);
  require(x0.size() == cfg.n_tokens, Err::ShapeMismatch, "x0 length mismatch");

  const int T = static_cast<int>(ckpt.schedule.horizon);
  const int k = cfg.categories;
  const std::vector<TokenRow> states = enumerate_states(cfg.n_tokens, k);
  TokenMatrix x0m(1, cfg.n_tokens);
  x0m.row(0) = x0;

  double total = 0.0;

  // L0 = E_{q(x1|x0)}[-log p(x0|x1)]
  {
    const CategoricalField q1 = forward_marginal(x0m, ckpt.schedule.abar(1), k);
    const std::vector<Mat> heads = reverse_tables(ckpt, states, 1, false);
    for (std::size_t s = 0; s < states.size(); ++s) {
      const double w = row_prob(q1.probs, states[s]);
      total -= w * std::log(row_prob(heads[s], x0));
    }
  }

  // L_t = E_{q(xt|x0)}[KL(q(x_{t-1}|x_t,x0) || p(x_{t-1}|x_t))], factorizing
  // over tokens
  for (int t = 2; t <= T; ++t) {
    const CategoricalField qt = forward_marginal(x0m, ckpt.schedule.abar(t), k);
    const std::vector<Mat> mixes = reverse_tables(ckpt, states, t, true);
    for (std::size_t s = 0; s < states.size(); ++s) {
      const double w = row_prob(qt.probs, states[s]);
      TokenMatrix xt(1, cfg.n_tokens);
      xt.row(0) = states[s];
      const CategoricalField post = posterior(xt, x0m, t, ckpt.schedule, k);
      double kl = 0.0;
      for (Index i = 0; i < cfg.n_tokens; ++i) {
        const RowVec p = post.probs.row(i);
        const RowVec q = mixes[s].row(i);
        kl += categorical_kl(p, q);
      }
      total += w * kl;
    }
  }

  // L_T = KL(q(x_T|x0) || uniform)
  {
    const double abar_T = ckpt.schedule.abar(T);
    const RowVec uniform = RowVec::Constant(k, 1.0 / static_cast<double>(k));
    RowVec marg(k);
    for (Index i = 0; i < cfg.n_tokens; ++i) {
      for (Index j = 0; j < k; ++j)
        marg[j] = (1.0 - abar_T) / static_cast<double>(k) + (j == x0[i] ? abar_T : 0.0);
      total += categorical_kl(marg, uniform);
    }
  }
  return total;
}

} // namespace ehrd3pm
