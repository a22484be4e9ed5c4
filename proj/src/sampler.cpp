#include "ehrd3pm/sampler.hpp"

#include <cmath>

#include "ehrd3pm/diffusion.hpp"
#include "ehrd3pm/error.hpp"
#include "ehrd3pm/parallel.hpp"

namespace ehrd3pm {

namespace {

constexpr double kLogFloor = 1e-12;

double floored_log(double x) { return std::log(x < kLogFloor ? kLogFloor : x); }

// d(loss)/d(z row) from d(loss)/d(logits row) through the head
void head_pullback_row(const DenoiserParams& params, Index token, const RowVec& dlogits,
                       RowVec& dz) {
  const auto& cfg = params.config;
  if (cfg.shared_head)
    dz.noalias() = dlogits * params.head.transpose();
  else
    dz.noalias() = dlogits * params.head.middleRows(token * cfg.hidden, cfg.hidden).transpose();
}

// gradient of energy wrt the latent; needs rng only for the Monte-Carlo
// classifier estimate
double energy_with_grad(const Mat& z, const DenoiserParams& params, const ContextSpec& context,
                        const GuidanceConfig& config, Rng* rng, Mat* dz) {
  const auto& cfg = params.config;
  const Index n_tok = cfg.n_tokens;
  const Mat probs = head_probs(params, z);
  if (dz) dz->setZero(z.rows(), z.cols());

  double v = 0.0;
  RowVec dz_row(cfg.hidden);
  for (int code : context.presence_codes) {
    const auto p = probs.row(code);
    v += floored_log(p[0]);
    if (dz) {
      RowVec dlogits = -p;
      dlogits[0] += 1.0; // d log p_0 / d logits = e_0 - p
      head_pullback_row(params, code, dlogits, dz_row);
      dz->row(code) += dz_row;
    }
  }

  if (context.scorer) {
    if (config.classifier_estimate == ClassifierEstimate::MeanField || rng == nullptr) {
      const double s = context.scorer->score(probs);
      require(s > 0.0, Err::InvalidContext, "classifier score must be positive");
      v += std::log(s);
      if (dz) {
        const Mat g = context.scorer->score_grad(probs) / s;
        for (Index i = 0; i < n_tok; ++i) {
          const auto p = probs.row(i);
          const double inner = (p.array() * g.row(i).array()).sum();
          RowVec dlogits = (p.array() * (g.row(i).array() - inner)).matrix();
          head_pullback_row(params, i, dlogits, dz_row);
          dz->row(i) += dz_row;
        }
      }
    } else {
      // score-function estimate: V = log mean_s w_s with w_s = p(c | x0_s),
      // grad = sum_s w_s * grad log p(x0_s | z) / sum_s w_s
      const int S = config.mc_samples;
      require(S >= 1, Err::InvalidConfig, "mc_samples must be >= 1");
      double wsum = 0.0;
      Mat gacc = Mat::Zero(z.rows(), z.cols());
      Mat onehot(n_tok, cfg.categories);
      std::vector<int> draw(static_cast<std::size_t>(n_tok));
      for (int s = 0; s < S; ++s) {
        onehot.setZero();
        for (Index i = 0; i < n_tok; ++i) {
          const int c = rng->categorical(probs.row(i).data(), static_cast<int>(cfg.categories));
          draw[static_cast<std::size_t>(i)] = c;
          onehot(i, c) = 1.0;
        }
        const double w = context.scorer->score(onehot);
        wsum += w;
        if (dz && w != 0.0) {
          for (Index i = 0; i < n_tok; ++i) {
            RowVec dlogits = -probs.row(i);
            dlogits[draw[static_cast<std::size_t>(i)]] += 1.0;
            head_pullback_row(params, i, dlogits, dz_row);
            gacc.row(i) += w * dz_row;
          }
        }
      }
      require(wsum > 0.0, Err::InvalidContext, "all Monte-Carlo classifier draws scored zero");
      v += std::log(wsum / static_cast<double>(S));
      if (dz) *dz += gacc / wsum;
    }
  }
  return v;
}

} // namespace

void ContextSpec::validate(Index n_codes) const {
  require(!presence_codes.empty() || scorer != nullptr, Err::InvalidContext,
          "context must name a code or provide a scorer");
  for (int code : presence_codes)
    require(code >= 0 && code < n_codes, Err::InvalidContext,
            "context code " + std::to_string(code) + " outside [0," + std::to_string(n_codes) + ")");
}

void GuidanceConfig::validate() const {
  require(steps >= 0, Err::InvalidConfig, "steps must be >= 0");
  require(eta > 0.0, Err::InvalidConfig, "eta must be positive");
  require(lambda >= 0.0 && tau >= 0.0, Err::InvalidConfig, "lambda and tau must be >= 0");
}

double energy(const Mat& z_latent, const DenoiserParams& params, const ContextSpec& context) {
  context.validate(params.config.n_tokens);
  GuidanceConfig cfg; // mean-field path only
  return energy_with_grad(z_latent, params, context, cfg, nullptr, nullptr);
}

double kl_regularizer(const Mat& z_current, const Mat& z_anchor, const DenoiserParams& params,
                      double lambda) {
  if (lambda == 0.0) return 0.0;
  const Mat p = head_probs(params, z_current);
  const Mat q = head_probs(params, z_anchor);
  double kl = 0.0;
  for (Index i = 0; i < p.rows(); ++i) {
    const RowVec pi = p.row(i);
    const RowVec qi = q.row(i);
    kl += categorical_kl(pi, qi);
  }
  return lambda * kl;
}

Mat langevin_refine(const Mat& z_latent, const DenoiserParams& params, const ContextSpec& context,
                    const GuidanceConfig& config, Rng& rng) {
  config.validate();
  context.validate(params.config.n_tokens);
  if (config.steps == 0) return z_latent;

  const Index n_tok = z_latent.rows();
  const Index d = z_latent.cols();
  const Mat anchor_probs = head_probs(params, z_latent);
  const Mat anchor_log = anchor_probs.unaryExpr([](double x) { return floored_log(x); });

  Mat y = z_latent;
  Mat dv, grad(n_tok, d);
  RowVec dz_row(d);
  const double noise_scale = std::sqrt(2.0 * config.eta * config.tau);

  for (int step = 0; step < config.steps; ++step) {
    energy_with_grad(y, params, context, config, &rng, &dv);
    grad = -dv; // gradient of (D_KL - V)

    if (config.lambda > 0.0) {
      const Mat p = head_probs(params, y);
      for (Index i = 0; i < n_tok; ++i) {
        const auto pi = p.row(i);
        double kl_i = 0.0;
        for (Index c = 0; c < pi.size(); ++c)
          if (pi[c] > 0.0) kl_i += pi[c] * (floored_log(pi[c]) - anchor_log(i, c));
        // d KL / d logits = p .* (log p - log q - KL)
        RowVec dlogits =
            (pi.array() *
             (pi.unaryExpr([](double x) { return floored_log(x); }).array() -
              anchor_log.row(i).array() - kl_i))
                .matrix();
        head_pullback_row(params, i, dlogits, dz_row);
        grad.row(i) += config.lambda * dz_row;
      }
    }

    y -= config.eta * grad;
    if (config.tau > 0.0)
      for (Index i = 0; i < n_tok; ++i)
        for (Index j = 0; j < d; ++j) y(i, j) += noise_scale * rng.normal();
    if (!y.allFinite()) throw_numeric(Err::NonFiniteLatent, "Langevin iterate diverged");
  }
  return y;
}

CodeMatrix reverse_chain(const Schedule& schedule, Index n_records, Index n_tokens, int k, Rng rng,
                         const PredictorFn& predictor, int threads, Index chunk) {
  require(n_records >= 1, Err::InvalidConfig, "need at least one sample");
  const int T = static_cast<int>(schedule.horizon);

  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(n_records));
  for (Index r = 0; r < n_records; ++r) streams.push_back(rng.substream(static_cast<std::uint64_t>(r)));

  TokenMatrix tokens(n_records, n_tokens);
  std::vector<double> uniform_row(static_cast<std::size_t>(k), 1.0 / static_cast<double>(k));
  for (Index r = 0; r < n_records; ++r)
    for (Index i = 0; i < n_tokens; ++i)
      tokens(r, i) = streams[static_cast<std::size_t>(r)].categorical(uniform_row.data(), k);

  for (int t = T; t >= 1; --t) {
    parallel_chunks(n_records, chunk, threads, [&](int, Index begin, Index end) {
      const Index m = end - begin;
      const TokenMatrix x_chunk = tokens.middleRows(begin, m);
      const Mat probs = predictor(x_chunk, t, begin, streams);

      if (t == 1) {
        // x_0 drawn directly from the predictor head
        for (Index r = 0; r < m; ++r)
          for (Index i = 0; i < n_tokens; ++i)
            tokens(begin + r, i) = streams[static_cast<std::size_t>(begin + r)].categorical(
                probs.row(r * n_tokens + i).data(), k);
        return;
      }

      CategoricalField field;
      field.n_records = m;
      field.n_tokens = n_tokens;
      field.k = k;
      field.probs = probs;
      const CategoricalField mix = reverse_mixture(x_chunk, field, t, schedule);
      for (Index r = 0; r < m; ++r)
        for (Index i = 0; i < n_tokens; ++i)
          tokens(begin + r, i) = streams[static_cast<std::size_t>(begin + r)].categorical(
              mix.probs.row(r * n_tokens + i).data(), k);
    });
  }
  return from_tokens(tokens);
}

namespace {

PredictorFn net_predictor(const Checkpoint& ckpt, const ContextSpec* context,
                          const GuidanceConfig* config) {
  return [&ckpt, context, config](const TokenMatrix& x_chunk, int t, Index offset,
                                  std::vector<Rng>& streams) -> Mat {
    const auto& cfg = ckpt.config();
    const Index n_tok = cfg.n_tokens;
    ForwardTrace trace = forward(ckpt.params, x_chunk, t, false);
    Mat probs(x_chunk.rows() * n_tok, cfg.categories);
    for (Index r = 0; r < x_chunk.rows(); ++r) {
      Mat z = trace.z_final.middleRows(r * n_tok, n_tok);
      if (context != nullptr)
        z = langevin_refine(z, ckpt.params, *context, *config,
                            streams[static_cast<std::size_t>(offset + r)]);
      probs.middleRows(r * n_tok, n_tok) = head_probs(ckpt.params, z);
    }
    return probs;
  };
}

} // namespace

CodeMatrix sample_unconditional(const Checkpoint& ckpt, Index n, Rng rng, int threads) {
  const auto& cfg = ckpt.config();
  return reverse_chain(ckpt.schedule, n, cfg.n_tokens, cfg.categories, rng,
                       net_predictor(ckpt, nullptr, nullptr), threads);
}

CodeMatrix sample_guided(const Checkpoint& ckpt, const ContextSpec& context, Index n,
                         const GuidanceConfig& config, Rng rng, int threads) {
  const auto& cfg = ckpt.config();
  config.validate();
  context.validate(cfg.n_tokens);
  return reverse_chain(ckpt.schedule, n, cfg.n_tokens, cfg.categories, rng,
                       net_predictor(ckpt, &context, &config), threads);
}

} // namespace ehrd3pm
