#include "ehrd3pm/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "ehrd3pm/diffusion.hpp"
#include "ehrd3pm/error.hpp"
#include "ehrd3pm/parallel.hpp"

namespace ehrd3pm {

namespace {
constexpr std::uint64_t kShuffleStream = 0xA110;
constexpr std::uint64_t kNoiseStream = 0xB0B0;
constexpr std::uint64_t kValStream = 0xFA10;
} // namespace

void TrainConfig::validate() const {
  require(lr > 0.0 && weight_decay >= 0.0, Err::InvalidConfig, "lr/weight decay must be positive");
  require(lr_decay > 0.0 && lr_decay <= 1.0, Err::InvalidConfig, "decay factor must lie in (0,1]");
  require(batch_size >= 1 && epochs >= 1, Err::InvalidConfig, "batch size and epochs must be >= 1");
  require(clip_norm > 0.0, Err::InvalidConfig, "clip norm must be positive");
}

double lr_at_epoch(const TrainConfig& config, int epoch) {
  require(epoch >= 0, Err::InvalidConfig, "epoch must be non-negative");
  return config.lr * std::pow(config.lr_decay, static_cast<double>(epoch));
}

double validation_negative_elbo(const DenoiserParams& params, const TokenMatrix& tokens,
                                const Schedule& schedule, std::uint64_t seed, int threads) {
  const Index n = tokens.rows();
  if (n == 0) return 0.0;
  const int T = static_cast<int>(schedule.horizon);
  const Index chunk = 256;
  const Index n_chunks = (n + chunk - 1) / chunk;
  std::vector<double> chunk_sums(static_cast<std::size_t>(n_chunks), 0.0);

  parallel_chunks(n, chunk, threads, [&](int c, Index begin, Index end) {
    const Index m = end - begin;
    TokenMatrix xt(m, tokens.cols());
    std::vector<int> ts(static_cast<std::size_t>(m));
    for (Index r = 0; r < m; ++r) {
      const Index i = begin + r;
      Rng rng(derive_seed(derive_seed(seed, kValStream), static_cast<std::uint64_t>(i)));
      const int t = 1 + static_cast<int>(i % T);
      ts[static_cast<std::size_t>(r)] = t;
      const TokenMatrix row = tokens.middleRows(i, 1);
      xt.row(r) = sample_forward(row, t, schedule, params.config.categories, rng).row(0);
    }
    ForwardTrace trace = forward(params, xt, ts, false);
    double sum = 0.0;
    for (Index r = 0; r < m; ++r) {
      const TokenRow x0 = tokens.row(begin + r);
      const TokenRow xtr = xt.row(r);
      const Mat pred = trace.probs_matrix.middleRows(r * tokens.cols(), tokens.cols());
      const ElboBreakdown b =
          elbo_loss(x0, ts[static_cast<std::size_t>(r)], xtr, pred, schedule);
      sum += b.total_negative_elbo;
    }
    chunk_sums[static_cast<std::size_t>(c)] = sum;
  });

  double total = 0.0;
  for (double s : chunk_sums) total += s;
  return total / static_cast<double>(n);
}

Checkpoint train(const DatasetSplit& data, const Schedule& schedule,
                 const DenoiserConfig& net_config, const TrainConfig& train_config,
                 const std::string& checkpoint_path) {
  train_config.validate();
  net_config.validate();
  require(data.train.n_records >= 1, Err::EmptyDataset, "empty training split");
  require(net_config.n_tokens == data.train.n_codes, Err::ShapeMismatch,
          "net n_tokens must equal dataset n_codes");

  const Index n_train = data.train.n_records;
  const TokenMatrix train_tokens = data.train.tokens();
  const TokenMatrix val_tokens = data.validation.tokens();

  Checkpoint ckpt;
  ckpt.schedule = schedule;
  ckpt.params = init_params(net_config, train_config.seed);
  ckpt.adam = make_adam_state(ckpt.params);

  AdamHyper hyper;
  hyper.weight_decay = train_config.weight_decay;

  double best_val = std::numeric_limits<double>::infinity();

  std::vector<int> order(static_cast<std::size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    hyper.lr = lr_at_epoch(train_config, epoch);

    Rng shuffle_rng(
        derive_seed(derive_seed(train_config.seed, kShuffleStream), static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    Index seen = 0;
    for (Index start = 0; start < n_train; start += train_config.batch_size) {
      const Index m = std::min<Index>(train_config.batch_size, n_train - start);
      TokenMatrix batch(m, net_config.n_tokens);
      std::vector<Rng> noise;
      noise.reserve(static_cast<std::size_t>(m));
      for (Index r = 0; r < m; ++r) {
        const int j = order[static_cast<std::size_t>(start + r)];
        batch.row(r) = train_tokens.row(j);
        noise.emplace_back(derive_seed(
            derive_seed(train_config.seed, kNoiseStream),
            static_cast<std::uint64_t>(epoch) * static_cast<std::uint64_t>(n_train) +
                static_cast<std::uint64_t>(j)));
      }
      LossResult res = loss_and_grad(ckpt.params, batch, schedule, noise, train_config.threads);
      clip_global_norm(res.grads, train_config.clip_norm);
      optimizer_step(ckpt.params, res.grads, ckpt.adam, hyper);
      epoch_loss += res.loss * static_cast<double>(m);
      seen += m;
    }
    epoch_loss /= static_cast<double>(seen);

    const double val_loss =
        val_tokens.rows() > 0
            ? validation_negative_elbo(ckpt.params, val_tokens, schedule, train_config.seed,
                                       train_config.threads)
            : epoch_loss;
    ckpt.epoch = epoch + 1;
    ckpt.train_history.push_back(epoch_loss);
    ckpt.val_history.push_back(val_loss);

    if (train_config.verbose)
      std::fprintf(stderr, "epoch %3d  lr %.3e  train %.5f  val %.5f\n", epoch, hyper.lr,
                   epoch_loss, val_loss);

    if (!checkpoint_path.empty()) {
      save_checkpoint(ckpt, checkpoint_path);
      if (val_loss < best_val) save_checkpoint(ckpt, checkpoint_path + ".best");
    }
    if (val_loss < best_val) best_val = val_loss;
  }
  return ckpt;
}

} // namespace ehrd3pm
