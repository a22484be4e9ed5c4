#pragma once

#include <string>

#include "ehrd3pm/checkpoint.hpp"
#include "ehrd3pm/code_matrix.hpp"
#include "ehrd3pm/metrics.hpp"
#include "ehrd3pm/mixture.hpp"
#include "ehrd3pm/sampler.hpp"
#include "ehrd3pm/schedule.hpp"
#include "ehrd3pm/train.hpp"

namespace ehrd3pm {

// Parsed run configuration; one JSON document with data / schedule / net /
// train sections plus the sampling, guidance, attack, utility and eval
// parameters used by the full pipeline.
struct RunConfig {
  // data
  MixtureSpec mixture;      // used when dataset_path is empty
  std::string dataset_path; // sparse text format
  Index n_train = 8000, n_valid = 1000, n_test = 1000;
  std::uint64_t data_seed = 1;

  ScheduleKind schedule_kind = ScheduleKind::Cosine;
  Index schedule_T = 100;
  ScheduleParams schedule_params;

  DenoiserConfig net; // n_tokens/categories filled from the data
  TrainConfig train;

  Index sample_n = 2000;
  std::uint64_t sample_seed = 2;

  int guidance_target = 0;
  GuidanceConfig guidance;
  Index guidance_n = 1000;
  std::uint64_t guidance_seed = 3;

  int attack_exposed = 256;
  double mir_threshold = 3.0;
  std::uint64_t attack_seed = 4;

  int utility_target = 0;
  double utility_reg = 1e-2;

  MmdConfig mmd_config;
  int mcad_bins = 175;
  double mcad_lo = 0.0, mcad_hi = 175.0;

  int threads = 0;

  std::string canonical_json; // the normalized config document
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// fidelity + privacy + utility metrics of one synthetic set against the split
MetricReport evaluate_samples(const CodeMatrix& synth, const DatasetSplit& real,
                              const RunConfig& config);

MetricReport fidelity_metrics(const CodeMatrix& real, const CodeMatrix& synth,
                              const MmdConfig& mmd_config, int mcad_bins, double lo, double hi);

void write_prevalence_csv(const CodeMatrix& real, const CodeMatrix& synth,
                          const std::string& path);

// generate-data -> train -> sample -> eval -> attack -> utility -> guidance
// uplift; writes report.json and CSV sidecars under out_dir and returns the
// report JSON. Deterministic in the config document.
std::string run_experiment(const RunConfig& config, const std::string& out_dir);

} // namespace ehrd3pm
