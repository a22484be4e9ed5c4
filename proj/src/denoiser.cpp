#include "ehrd3pm/denoiser.hpp"

#include <cmath>

#include "ehrd3pm/error.hpp"
#include "ehrd3pm/parallel.hpp"

namespace ehrd3pm {

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return x > 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// rowwise layer norm without affine terms
void layer_norm_rows(const Mat& x, double eps, Mat& y, Vec& mean, Vec& rstd) {
  const Index rows = x.rows();
  const Index d = x.cols();
  y.resize(rows, d);
  mean.resize(rows);
  rstd.resize(rows);
  for (Index r = 0; r < rows; ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().sum() / static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    y.row(r) = ((x.row(r).array() - mu) * rs).matrix();
  }
}

// dy -> dx given the normalized values y and cached 1/std
Mat layer_norm_backward(const Mat& dy, const Mat& y, const Vec& rstd) {
  Mat dx(dy.rows(), dy.cols());
  const double d = static_cast<double>(dy.cols());
  for (Index r = 0; r < dy.rows(); ++r) {
    const double m_dy = dy.row(r).mean();
    const double m_dyy = (dy.row(r).array() * y.row(r).array()).sum() / d;
    dx.row(r) = (rstd[r] * (dy.row(r).array() - m_dy - y.row(r).array() * m_dyy)).matrix();
  }
  return dx;
}

void softmax_rows(Mat& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp().matrix();
    m.row(r) /= m.row(r).sum();
  }
}

Mat positional_table(const DenoiserParams& params) {
  const auto& cfg = params.config;
  switch (cfg.pos_kind) {
    case PositionalKind::Full: return params.pos_full;
    case PositionalKind::Axial: {
      Mat table(cfg.n_tokens, cfg.hidden);
      for (Index i = 0; i < cfg.n_tokens; ++i)
        table.row(i) = params.pos_row.row(i / cfg.axial_cols) + params.pos_col.row(i % cfg.axial_cols);
      return table;
    }
    case PositionalKind::Category: return Mat(); // added per token instead
  }
  return Mat();
}

void check_finite(const Mat& m, Err code, const char* what) {
  if (!m.allFinite()) throw_numeric(code, what);
}

} // namespace

void DenoiserConfig::validate() const {
  require(n_tokens >= 1, Err::InvalidConfig, "n_tokens must be >= 1");
  require(categories >= 2, Err::InvalidConfig, "categories must be >= 2");
  require(hidden >= 1 && layers >= 1 && heads >= 1, Err::InvalidConfig,
          "hidden, layers, heads must be >= 1");
  require(hidden % heads == 0, Err::InvalidConfig, "hidden must be divisible by heads");
  require(proj >= 1 && proj <= n_tokens, Err::InvalidConfig, "proj must lie in [1, n_tokens]");
  require(ln_eps > 0.0, Err::InvalidConfig, "ln_eps must be positive");
  if (pos_kind == PositionalKind::Axial)
    require(axial_rows >= 1 && axial_cols >= 1 &&
                static_cast<std::int64_t>(axial_rows) * axial_cols >= n_tokens,
            Err::InvalidConfig, "axial grid must cover n_tokens");
}

DenoiserParams DenoiserParams::zeros_like() const {
  DenoiserParams z = *this;
  for_each_tensor(z, [](Mat& m) { m.setZero(); });
  return z;
}

std::int64_t parameter_count(const DenoiserConfig& config) {
  const std::int64_t n = config.n_tokens, k = config.categories, d = config.hidden;
  const std::int64_t f = config.ff(), p = config.proj;
  std::int64_t count = k * d; // token embedding
  switch (config.pos_kind) {
    case PositionalKind::Full: count += n * d; break;
    case PositionalKind::Axial: count += (config.axial_rows + config.axial_cols) * d; break;
    case PositionalKind::Category: count += k * d; break;
  }
  const std::int64_t time_mlp = d * d + d + d * d + d;
  const std::int64_t attn = 4 * d * d + 2 * n * p;
  const std::int64_t ffn = d * f + f + f * d + d;
  count += config.layers * (time_mlp + attn + ffn);
  count += config.shared_head ? d * k : n * d * k;
  return count;
}

DenoiserParams init_params(const DenoiserConfig& config, std::uint64_t seed) {
  config.validate();
  DenoiserParams params;
  params.config = config;
  Rng rng(derive_seed(seed, 0x1217));

  const auto gaussian = [&](Index rows, Index cols) {
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = 0.02 * rng.normal();
    return m;
  };
  const auto fan_in_uniform = [&](Index rows, Index cols, Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    return m;
  };

  const int n = config.n_tokens, k = config.categories, d = config.hidden;
  const int f = config.ff(), p = config.proj;

  params.token_embed = gaussian(k, d);
  switch (config.pos_kind) {
    case PositionalKind::Full: params.pos_full = gaussian(n, d); break;
    case PositionalKind::Axial:
      params.pos_row = gaussian(config.axial_rows, d);
      params.pos_col = gaussian(config.axial_cols, d);
      break;
    case PositionalKind::Category: params.pos_cat = gaussian(k, d); break;
  }
  params.layers.resize(static_cast<std::size_t>(config.layers));
  for (auto& layer : params.layers) {
    layer.time_mlp.w1 = fan_in_uniform(d, d, d);
    layer.time_mlp.b1 = Mat::Zero(d, 1);
    layer.time_mlp.w2 = fan_in_uniform(d, d, d);
    layer.time_mlp.b2 = Mat::Zero(d, 1);
    layer.attn.wq = fan_in_uniform(d, d, d);
    layer.attn.wk = fan_in_uniform(d, d, d);
    layer.attn.wv = fan_in_uniform(d, d, d);
    layer.attn.wo = fan_in_uniform(d, d, d);
    layer.attn.proj_k = fan_in_uniform(n, p, n);
    layer.attn.proj_v = fan_in_uniform(n, p, n);
    layer.ffn.w1 = fan_in_uniform(d, f, d);
    layer.ffn.b1 = Mat::Zero(f, 1);
    layer.ffn.w2 = fan_in_uniform(f, d, f);
    layer.ffn.b2 = Mat::Zero(d, 1);
  }
  params.head = config.shared_head ? fan_in_uniform(d, k, d)
                                   : fan_in_uniform(static_cast<Index>(n) * d, k, d);
  return params;
}

namespace {

Vec sinusoid(int t, int width) {
  Vec e(width);
  for (int i = 0; 2 * i < width; ++i) {
    const double omega = std::pow(10000.0, -2.0 * i / static_cast<double>(width));
    const double phase = static_cast<double>(t) * omega;
    e[2 * i] = std::sin(phase);
    if (2 * i + 1 < width) e[2 * i + 1] = std::cos(phase);
  }
  return e;
}

} // namespace

Vec time_embedding(int t, int width, int horizon) {
  require(t >= 0 && t <= horizon, Err::StepOutOfRange,
          "time step " + std::to_string(t) + " outside [0," + std::to_string(horizon) + "]");
  return sinusoid(t, width);
}

CategoricalField ForwardTrace::probs() const {
  CategoricalField f;
  f.n_records = n_records;
  f.n_tokens = n_tokens;
  f.k = k;
  f.probs = probs_matrix;
  return f;
}

Mat head_logits(const DenoiserParams& params, const Mat& z_latent) {
  const auto& cfg = params.config;
  require(z_latent.cols() == cfg.hidden && z_latent.rows() % cfg.n_tokens == 0,
          Err::ShapeMismatch, "latent shape does not match config");
  Mat logits(z_latent.rows(), cfg.categories);
  if (cfg.shared_head) {
    logits.noalias() = z_latent * params.head;
  } else {
    for (Index r = 0; r < z_latent.rows(); ++r) {
      const Index token = r % cfg.n_tokens;
      logits.row(r).noalias() = z_latent.row(r) * params.head.middleRows(token * cfg.hidden, cfg.hidden);
    }
  }
  return logits;
}

Mat head_probs(const DenoiserParams& params, const Mat& z_latent) {
  Mat probs = head_logits(params, z_latent);
  softmax_rows(probs);
  return probs;
}

ForwardTrace forward(const DenoiserParams& params, const TokenMatrix& x_t, int t,
                     bool keep_cache) {
  return forward(params, x_t, std::vector<int>(static_cast<std::size_t>(x_t.rows()), t),
                 keep_cache);
}

ForwardTrace forward(const DenoiserParams& params, const TokenMatrix& x_t,
                     const std::vector<int>& t_per_record, bool keep_cache) {
  const auto& cfg = params.config;
  const Index n = x_t.rows();
  const Index N = cfg.n_tokens, D = cfg.hidden, K = cfg.categories;
  const Index H = cfg.heads, P = cfg.proj, F = cfg.ff();
  const Index dh = D / H;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  require(x_t.cols() == N, Err::ShapeMismatch, "token count does not match config");
  require(static_cast<Index>(t_per_record.size()) == n, Err::ShapeMismatch,
          "one time step per record required");
  for (Index r = 0; r < n; ++r)
    for (Index i = 0; i < N; ++i)
      require(x_t(r, i) >= 0 && x_t(r, i) < K, Err::NotOneHot, "token category outside [0,K)");

  ForwardTrace trace;
  trace.n_records = n;
  trace.n_tokens = N;
  trace.k = K;
  trace.t = t_per_record;
  trace.tokens = x_t;
  if (keep_cache) trace.layers.resize(static_cast<std::size_t>(cfg.layers));

  trace.sinus.resize(n, D);
  for (Index r = 0; r < n; ++r) {
    require(t_per_record[static_cast<std::size_t>(r)] >= 0, Err::StepOutOfRange,
            "negative time step");
    trace.sinus.row(r) =
        sinusoid(t_per_record[static_cast<std::size_t>(r)], static_cast<int>(D)).transpose();
  }

  Mat z(n * N, D);
  for (Index r = 0; r < n; ++r)
    for (Index i = 0; i < N; ++i) z.row(r * N + i) = params.token_embed.row(x_t(r, i));
  if (keep_cache) trace.z0 = z;

  const Mat pos = positional_table(params);

  Mat ln1, q, kmat, v, kp, vp, attn, attn_out, z_mid, ln2, ffn_u, ffn_h;
  Vec ln1_mean, ln1_rstd, ln2_mean, ln2_rstd;

  for (int l = 0; l < cfg.layers; ++l) {
    const auto& lp = params.layers[static_cast<std::size_t>(l)];
    const bool inject_time = cfg.time_injection == TimeInjection::EveryLayer || l == 0;

    // per-record time vector through the two-layer softplus MLP
    Mat time_u(n, D), time_h(n, D), time_vec(n, D);
    if (inject_time) {
      for (Index r = 0; r < n; ++r) {
        Vec u = lp.time_mlp.w1 * trace.sinus.row(r).transpose() + lp.time_mlp.b1.col(0);
        Vec h = u.unaryExpr([](double x) { return softplus(x); });
        Vec tv = lp.time_mlp.w2 * h + lp.time_mlp.b2.col(0);
        time_u.row(r) = u.transpose();
        time_h.row(r) = h.transpose();
        time_vec.row(r) = tv.transpose();
      }
    } else {
      time_u.setZero();
      time_h.setZero();
      time_vec.setZero();
    }

    // z' = z + E_pos + E_time
    for (Index r = 0; r < n; ++r) {
      auto block = z.middleRows(r * N, N);
      if (cfg.pos_kind == PositionalKind::Category) {
        for (Index i = 0; i < N; ++i) block.row(i) += params.pos_cat.row(x_t(r, i));
      } else {
        block += pos;
      }
      if (inject_time) block.rowwise() += time_vec.row(r);
    }

    layer_norm_rows(z, cfg.ln_eps, ln1, ln1_mean, ln1_rstd);
    q.noalias() = ln1 * lp.attn.wq;
    kmat.noalias() = ln1 * lp.attn.wk;
    v.noalias() = ln1 * lp.attn.wv;

    kp.resize(n * P, D);
    vp.resize(n * P, D);
    for (Index r = 0; r < n; ++r) {
      kp.middleRows(r * P, P).noalias() = lp.attn.proj_k.transpose() * kmat.middleRows(r * N, N);
      vp.middleRows(r * P, P).noalias() = lp.attn.proj_v.transpose() * v.middleRows(r * N, N);
    }

    attn.resize(n * H * N, P);
    attn_out.resize(n * N, D);
    for (Index r = 0; r < n; ++r)
      for (Index h = 0; h < H; ++h) {
        auto q_h = q.block(r * N, h * dh, N, dh);
        auto kp_h = kp.block(r * P, h * dh, P, dh);
        auto vp_h = vp.block(r * P, h * dh, P, dh);
        auto w = attn.middleRows((r * H + h) * N, N);
        w.noalias() = q_h * kp_h.transpose() * inv_scale;
        Mat wm = w;
        softmax_rows(wm);
        w = wm;
        attn_out.block(r * N, h * dh, N, dh).noalias() = wm * vp_h;
      }

    z_mid = z;
    z_mid.noalias() += attn_out * lp.attn.wo;

    layer_norm_rows(z_mid, cfg.ln_eps, ln2, ln2_mean, ln2_rstd);
    ffn_u.noalias() = ln2 * lp.ffn.w1;
    ffn_u.rowwise() += lp.ffn.b1.col(0).transpose();
    ffn_h = ffn_u.unaryExpr([](double x) { return gelu(x); });
    z = z_mid;
    z.noalias() += ffn_h * lp.ffn.w2;
    z.rowwise() += lp.ffn.b2.col(0).transpose();

    if (keep_cache) {
      auto& lt = trace.layers[static_cast<std::size_t>(l)];
      lt.ln1 = ln1;
      lt.ln1_mean = ln1_mean;
      lt.ln1_rstd = ln1_rstd;
      lt.q = q;
      lt.k = kmat;
      lt.v = v;
      lt.kp = kp;
      lt.vp = vp;
      lt.attn = attn;
      lt.attn_out = attn_out;
      lt.ln2 = ln2;
      lt.ln2_mean = ln2_mean;
      lt.ln2_rstd = ln2_rstd;
      lt.ffn_u = ffn_u;
      lt.ffn_h = ffn_h;
      lt.time_u = time_u;
      lt.time_h = time_h;
      lt.time_vec = time_vec;
    }
  }

  trace.z_final = z;
  trace.logits = head_logits(params, z);
  trace.probs_matrix = trace.logits;
  softmax_rows(trace.probs_matrix);
  check_finite(trace.z_final, Err::NonFiniteActivation, "non-finite latent");
  check_finite(trace.probs_matrix, Err::NonFiniteActivation, "non-finite probabilities");
  return trace;
}

void backward(const DenoiserParams& params, const ForwardTrace& trace, const Mat& dprobs,
              DenoiserParams& grads) {
  const auto& cfg = params.config;
  const Index n = trace.n_records;
  const Index N = cfg.n_tokens, D = cfg.hidden;
  const Index H = cfg.heads, P = cfg.proj;
  const Index dh = D / H;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  require(!trace.layers.empty(), Err::InvalidConfig, "backward needs a cached forward trace");
  require(dprobs.rows() == n * N && dprobs.cols() == cfg.categories, Err::ShapeMismatch,
          "dprobs shape mismatch");

  // softmax jacobian: dlogit_a = p_a * (dp_a - sum_c p_c dp_c)
  Mat dlogits(n * N, cfg.categories);
  for (Index r = 0; r < n * N; ++r) {
    const auto p = trace.probs_matrix.row(r);
    const double inner = (p.array() * dprobs.row(r).array()).sum();
    dlogits.row(r) = (p.array() * (dprobs.row(r).array() - inner)).matrix();
  }

  Mat dz(n * N, D);
  if (cfg.shared_head) {
    grads.head.noalias() += trace.z_final.transpose() * dlogits;
    dz.noalias() = dlogits * params.head.transpose();
  } else {
    for (Index r = 0; r < n * N; ++r) {
      const Index token = r % N;
      grads.head.middleRows(token * D, D).noalias() +=
          trace.z_final.row(r).transpose() * dlogits.row(r);
      dz.row(r).noalias() =
          dlogits.row(r) * params.head.middleRows(token * D, D).transpose();
    }
  }

  Mat dq(n * N, D), dk(n * N, D), dv(n * N, D), dln1(n * N, D), dkp(n * P, D), dvp(n * P, D);

  for (int l = cfg.layers - 1; l >= 0; --l) {
    const auto& lp = params.layers[static_cast<std::size_t>(l)];
    auto& lg = grads.layers[static_cast<std::size_t>(l)];
    const auto& lt = trace.layers[static_cast<std::size_t>(l)];
    const bool inject_time = cfg.time_injection == TimeInjection::EveryLayer || l == 0;

    // feed-forward with residual: z_out = z_mid + gelu(ln2 w1 + b1) w2 + b2
    lg.ffn.w2.noalias() += lt.ffn_h.transpose() * dz;
    lg.ffn.b2.col(0) += dz.colwise().sum().transpose();
    Mat dffn_h = dz * lp.ffn.w2.transpose();
    Mat dffn_u =
        (dffn_h.array() * lt.ffn_u.unaryExpr([](double x) { return gelu_grad(x); }).array())
            .matrix();
    lg.ffn.w1.noalias() += lt.ln2.transpose() * dffn_u;
    lg.ffn.b1.col(0) += dffn_u.colwise().sum().transpose();
    Mat dln2 = dffn_u * lp.ffn.w1.transpose();
    Mat dz_mid = dz + layer_norm_backward(dln2, lt.ln2, lt.ln2_rstd);

    // attention with residual: z_mid = z' + (heads(ln1)) wo
    lg.attn.wo.noalias() += lt.attn_out.transpose() * dz_mid;
    Mat dattn_out = dz_mid * lp.attn.wo.transpose();

    dkp.setZero();
    dvp.setZero();
    for (Index r = 0; r < n; ++r)
      for (Index h = 0; h < H; ++h) {
        auto w = lt.attn.middleRows((r * H + h) * N, N);
        auto vp_h = lt.vp.block(r * P, h * dh, P, dh);
        auto q_h = lt.q.block(r * N, h * dh, N, dh);
        auto kp_h = lt.kp.block(r * P, h * dh, P, dh);
        auto dO_h = dattn_out.block(r * N, h * dh, N, dh);

        Mat dw = dO_h * vp_h.transpose(); // N x P
        dvp.block(r * P, h * dh, P, dh).noalias() += w.transpose() * dO_h;
        // softmax backward per row
        Mat ds(N, P);
        for (Index i = 0; i < N; ++i) {
          const double inner = (dw.row(i).array() * w.row(i).array()).sum();
          ds.row(i) = (w.row(i).array() * (dw.row(i).array() - inner)).matrix();
        }
        dq.block(r * N, h * dh, N, dh).noalias() = ds * kp_h * inv_scale;
        dkp.block(r * P, h * dh, P, dh).noalias() += ds.transpose() * q_h * inv_scale;
      }

    for (Index r = 0; r < n; ++r) {
      auto k_r = lt.k.middleRows(r * N, N);
      auto v_r = lt.v.middleRows(r * N, N);
      auto dkp_r = dkp.middleRows(r * P, P);
      auto dvp_r = dvp.middleRows(r * P, P);
      lg.attn.proj_k.noalias() += k_r * dkp_r.transpose();
      lg.attn.proj_v.noalias() += v_r * dvp_r.transpose();
      dk.middleRows(r * N, N).noalias() = lp.attn.proj_k * dkp_r;
      dv.middleRows(r * N, N).noalias() = lp.attn.proj_v * dvp_r;
    }

    lg.attn.wq.noalias() += lt.ln1.transpose() * dq;
    lg.attn.wk.noalias() += lt.ln1.transpose() * dk;
    lg.attn.wv.noalias() += lt.ln1.transpose() * dv;
    dln1.noalias() = dq * lp.attn.wq.transpose();
    dln1.noalias() += dk * lp.attn.wk.transpose();
    dln1.noalias() += dv * lp.attn.wv.transpose();

    Mat dz_pre = dz_mid + layer_norm_backward(dln1, lt.ln1, lt.ln1_rstd);

    // positional and time embeddings added at the top of the layer
    for (Index r = 0; r < n; ++r) {
      auto block = dz_pre.middleRows(r * N, N);
      switch (cfg.pos_kind) {
        case PositionalKind::Full: grads.pos_full += block; break;
        case PositionalKind::Axial:
          for (Index i = 0; i < N; ++i) {
            grads.pos_row.row(i / cfg.axial_cols) += block.row(i);
            grads.pos_col.row(i % cfg.axial_cols) += block.row(i);
          }
          break;
        case PositionalKind::Category:
          for (Index i = 0; i < N; ++i) grads.pos_cat.row(trace.tokens(r, i)) += block.row(i);
          break;
      }
      if (inject_time) {
        Vec dtv = block.colwise().sum().transpose();
        lg.time_mlp.w2.noalias() += dtv * lt.time_h.row(r);
        lg.time_mlp.b2.col(0) += dtv;
        Vec dh_vec = lp.time_mlp.w2.transpose() * dtv;
        Vec du =
            (dh_vec.array() *
             lt.time_u.row(r).transpose().unaryExpr([](double x) { return sigmoid(x); }).array())
                .matrix();
        lg.time_mlp.w1.noalias() += du * trace.sinus.row(r);
        lg.time_mlp.b1.col(0) += du;
      }
    }

    dz = std::move(dz_pre);
  }

  for (Index r = 0; r < n; ++r)
    for (Index i = 0; i < N; ++i) grads.token_embed.row(trace.tokens(r, i)) += dz.row(r * N + i);
}

LossResult loss_and_grad(const DenoiserParams& params, const TokenMatrix& batch,
                         const Schedule& schedule, std::vector<Rng>& noise_rngs, int threads) {
  const auto& cfg = params.config;
  const Index n = batch.rows();
  require(n >= 1, Err::EmptyDataset, "empty batch");
  require(static_cast<Index>(noise_rngs.size()) == n, Err::ShapeMismatch,
          "one noise stream per record required");
  const int T = static_cast<int>(schedule.horizon);
  const double scale = static_cast<double>(T) / static_cast<double>(n);

  const Index chunk = 64;
  const Index n_chunks = (n + chunk - 1) / chunk;
  std::vector<DenoiserParams> chunk_grads(static_cast<std::size_t>(n_chunks));
  std::vector<double> chunk_loss(static_cast<std::size_t>(n_chunks), 0.0);

  parallel_chunks(n, chunk, threads, [&](int c, Index begin, Index end) {
    const Index m = end - begin;
    TokenMatrix xt(m, cfg.n_tokens);
    std::vector<int> ts(static_cast<std::size_t>(m));
    for (Index r = 0; r < m; ++r) {
      Rng& rng = noise_rngs[static_cast<std::size_t>(begin + r)];
      const int t = 1 + rng.uniform_int(T);
      ts[static_cast<std::size_t>(r)] = t;
      const TokenMatrix row = batch.middleRows(begin + r, 1);
      xt.row(r) = sample_forward(row, t, schedule, cfg.categories, rng).row(0);
    }

    ForwardTrace trace = forward(params, xt, ts, true);
    Mat dprobs(m * cfg.n_tokens, cfg.categories);
    double loss = 0.0;
    for (Index r = 0; r < m; ++r) {
      Mat dpred;
      const TokenRow x0 = batch.row(begin + r);
      const TokenRow xtr = xt.row(r);
      const Mat pred = trace.probs_matrix.middleRows(r * cfg.n_tokens, cfg.n_tokens);
      const double term =
          elbo_term_grad(x0, ts[static_cast<std::size_t>(r)], xtr, pred, schedule, dpred);
      loss += scale * term;
      dprobs.middleRows(r * cfg.n_tokens, cfg.n_tokens) = dpred * scale;
    }

    chunk_grads[static_cast<std::size_t>(c)] = params.zeros_like();
    backward(params, trace, dprobs, chunk_grads[static_cast<std::size_t>(c)]);
    chunk_loss[static_cast<std::size_t>(c)] = loss;
  });

  LossResult result;
  result.grads = params.zeros_like();
  for (Index c = 0; c < n_chunks; ++c) {
    result.loss += chunk_loss[static_cast<std::size_t>(c)];
    for_each_tensor_pair(result.grads, chunk_grads[static_cast<std::size_t>(c)],
                         [](Mat& acc, Mat& g) { acc += g; });
  }

  if (!std::isfinite(result.loss)) throw_numeric(Err::NonFiniteGradient, "non-finite loss");
  for_each_tensor(result.grads, [](Mat& g) {
    if (!g.allFinite()) throw_numeric(Err::NonFiniteGradient, "non-finite gradient tensor");
  });
  return result;
}

std::int64_t attention_token_ops(const ForwardTrace& trace, const DenoiserConfig& config) {
  require(!trace.layers.empty(), Err::InvalidConfig, "needs a cached trace");
  const Index dh = config.hidden / config.heads;
  std::int64_t ops = 0;
  for (const auto& lt : trace.layers) {
    // key/value projections: (P x N) * (N x D) per record, twice
    ops += 2 * static_cast<std::int64_t>(lt.kp.rows()) * lt.kp.cols() * trace.n_tokens;
    // scores and weighted values over the materialized N x P weights
    ops += 2 * static_cast<std::int64_t>(lt.attn.rows()) * lt.attn.cols() * dh;
  }
  return ops;
}

} // namespace ehrd3pm
