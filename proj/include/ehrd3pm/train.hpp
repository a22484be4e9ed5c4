#pragma once

#include <cstdint>
#include <string>

#include "ehrd3pm/checkpoint.hpp"
#include "ehrd3pm/code_matrix.hpp"

namespace ehrd3pm {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-5;
  double lr_decay = 0.99; // exponential factor per epoch
  int batch_size = 256;
  int epochs = 100;
  double clip_norm = 1.0; // global gradient norm
  std::uint64_t seed = 0;
  int threads = 0;     // 0 -> hardware concurrency
  bool verbose = false;

  void validate() const;
};

double lr_at_epoch(const TrainConfig& config, int epoch);

// Shuffled mini-batch training with per-epoch validation. Shuffling and
// forward-noise sampling use separate counter-based streams keyed on
// (seed, epoch, dataset index), so batch size changes do not perturb noise
// draws. When checkpoint_path is non-empty, every epoch snapshot is written
// atomically there and the best-validation snapshot to checkpoint_path +
// ".best". With an empty validation split the epoch's training loss stands in
// for the validation entry.
Checkpoint train(const DatasetSplit& data, const Schedule& schedule,
                 const DenoiserConfig& net_config, const TrainConfig& train_config,
                 const std::string& checkpoint_path = "");

// Stratified single-sample estimate of the full-sum negative ELBO: record i
// is evaluated at t = 1 + (i mod T) with a noise draw frozen in (seed, i).
double validation_negative_elbo(const DenoiserParams& params, const TokenMatrix& tokens,
                                const Schedule& schedule, std::uint64_t seed, int threads = 1);

} // namespace ehrd3pm
