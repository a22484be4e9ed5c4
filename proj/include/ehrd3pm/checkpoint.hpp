#pragma once

#include <string>
#include <vector>

#include "ehrd3pm/denoiser.hpp"
#include "ehrd3pm/optimizer.hpp"
#include "ehrd3pm/schedule.hpp"

namespace ehrd3pm {

struct Checkpoint {
  DenoiserParams params; // carries the config
  Schedule schedule;
  AdamState adam;
  int epoch = 0;
  std::vector<double> train_history; // negative ELBO per epoch
  std::vector<double> val_history;

  const DenoiserConfig& config() const { return params.config; }
};

// File layout: magic "EHD3", format version as uint32 little-endian, uint64
// little-endian byte length + canonical JSON block, then every tensor as raw
// IEEE-754 binary64 little-endian in declared order (schedule retention,
// parameter tensors, Adam first moments, Adam second moments).
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string config_to_json(const DenoiserConfig& config);
DenoiserConfig config_from_json(const std::string& text);

} // namespace ehrd3pm
