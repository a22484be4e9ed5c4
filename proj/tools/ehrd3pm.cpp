// Command-line front end; every subcommand is a thin wrapper over a library
// call. Exit codes: 0 success, 2 validation error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ehrd3pm/downstream.hpp"
#include "ehrd3pm/experiment.hpp"
#include "ehrd3pm/privacy.hpp"
#include "ehrd3pm/reverse_loglik.hpp"

using namespace ehrd3pm;
namespace fs = std::filesystem;

namespace {

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw_validation(Err::InvalidConfig, "range must look like lo:hi");
  return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
}

int run(int argc, char** argv) {
  CLI::App app{"multinomial discrete-diffusion generator for binary medical-code matrices"};
  app.require_subcommand(1);

  std::string config_path, out = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  app.add_option("--config", config_path, "run-config JSON")->capture_default_str();
  app.add_option("--out", out, "output file or directory")->capture_default_str();
  app.add_option("--seed", seed, "override the relevant seed")
      ->each([&](const std::string&) { seed_given = true; });

  auto* cmd_gen = app.add_subcommand("gen-data", "sample a ground-truth mixture into splits");
  auto* cmd_train = app.add_subcommand("train", "train a denoiser and write a checkpoint");
  bool train_verbose = false;
  cmd_train->add_flag("--verbose", train_verbose, "per-epoch progress on stderr");

  auto* cmd_sample = app.add_subcommand("sample", "unconditional generation");
  std::string ckpt_path, sample_out;
  std::int64_t sample_n = 1000;
  cmd_sample->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  cmd_sample->add_option("--n", sample_n, "number of records")->capture_default_str();
  cmd_sample->add_option("--out", sample_out, "output dataset path")->required();

  auto* cmd_guide = app.add_subcommand("guide", "code-presence guided generation");
  std::vector<int> guide_codes;
  GuidanceConfig gcfg;
  std::string guide_out;
  std::int64_t guide_n = 1000;
  cmd_guide->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  cmd_guide->add_option("--code", guide_codes, "target code index (repeatable)")->required();
  cmd_guide->add_option("--steps", gcfg.steps, "Langevin steps")->capture_default_str();
  cmd_guide->add_option("--eta", gcfg.eta, "Langevin step size")->capture_default_str();
  cmd_guide->add_option("--lambda", gcfg.lambda, "KL regularizer weight")->capture_default_str();
  cmd_guide->add_option("--tau", gcfg.tau, "noise temperature")->capture_default_str();
  cmd_guide->add_option("--n", guide_n, "number of records")->capture_default_str();
  cmd_guide->add_option("--out", guide_out, "output dataset path")->required();

  auto* cmd_eval = app.add_subcommand("eval", "fidelity metrics real vs synthetic");
  std::string real_path, synth_path, prevalence_csv, mcad_range = "0:175";
  int mmd_kernels = 5, mcad_bins = 175;
  cmd_eval->add_option("--real", real_path)->required();
  cmd_eval->add_option("--synth", synth_path)->required();
  cmd_eval->add_option("--mmd-kernels", mmd_kernels)->capture_default_str();
  cmd_eval->add_option("--mcad-bins", mcad_bins)->capture_default_str();
  cmd_eval->add_option("--mcad-range", mcad_range, "lo:hi")->capture_default_str();
  cmd_eval->add_option("--prevalence-csv", prevalence_csv, "scatter data sidecar");

  auto* cmd_attack = app.add_subcommand("attack", "attribute/membership inference risks");
  std::string train_path, holdout_path;
  int exposed = 256;
  double mir_threshold = 3.0;
  cmd_attack->add_option("--train", train_path)->required();
  cmd_attack->add_option("--holdout", holdout_path)->required();
  cmd_attack->add_option("--synth", synth_path)->required();
  cmd_attack->add_option("--exposed", exposed)->capture_default_str();
  cmd_attack->add_option("--mir-threshold", mir_threshold)->capture_default_str();

  auto* cmd_utility = app.add_subcommand("utility", "downstream classifier comparison");
  std::string test_path;
  int target_code = 0;
  double reg = 1e-2;
  cmd_utility->add_option("--train", train_path)->required();
  cmd_utility->add_option("--test", test_path)->required();
  cmd_utility->add_option("--synth", synth_path, "optional synthetic training set");
  cmd_utility->add_option("--target", target_code, "label code index")->required();
  cmd_utility->add_option("--reg", reg)->capture_default_str();

  auto* cmd_bench = app.add_subcommand("bench", "full pipeline, report.json under --out");

  CLI11_PARSE(app, argc, argv);

  const auto load_config = [&]() {
    require(!config_path.empty(), Err::InvalidConfig, "--config is required");
    RunConfig cfg = load_run_config(config_path);
    if (seed_given) {
      cfg.data_seed = cfg.sample_seed = cfg.guidance_seed = cfg.attack_seed = seed;
      cfg.train.seed = seed;
    }
    return cfg;
  };

  if (cmd_gen->parsed()) {
    RunConfig cfg = load_config();
    require(cfg.dataset_path.empty(), Err::InvalidSpec, "gen-data needs a mixture config");
    const Index total = cfg.n_train + cfg.n_valid + cfg.n_test;
    const GroundTruth gt = gen_ground_truth(cfg.mixture, total, cfg.data_seed);
    const DatasetSplit split = split_dataset(gt.data, cfg.n_train, cfg.n_valid, cfg.data_seed);
    fs::create_directories(out);
    save_dataset(split.train, (fs::path(out) / "train.txt").string());
    save_dataset(split.validation, (fs::path(out) / "valid.txt").string());
    save_dataset(split.test, (fs::path(out) / "test.txt").string());
    nlohmann::json truth;
    for (Index c = 0; c < gt.prevalence.size(); ++c)
      truth["prevalence"].push_back(gt.prevalence[c]);
    std::ofstream moments(fs::path(out) / "truth.json");
    moments << truth.dump(2) << '\n';
    std::printf("wrote %lld/%lld/%lld records to %s\n",
                static_cast<long long>(split.train.n_records),
                static_cast<long long>(split.validation.n_records),
                static_cast<long long>(split.test.n_records), out.c_str());
    return 0;
  }

  if (cmd_train->parsed()) {
    RunConfig cfg = load_config();
    cfg.train.verbose = cfg.train.verbose || train_verbose;
    CodeMatrix all;
    if (!cfg.dataset_path.empty())
      all = load_dataset(cfg.dataset_path);
    else
      all = gen_ground_truth(cfg.mixture, cfg.n_train + cfg.n_valid + cfg.n_test, cfg.data_seed)
                .data;
    const DatasetSplit split = split_dataset(all, cfg.n_train, cfg.n_valid, cfg.data_seed);
    DenoiserConfig net = cfg.net;
    net.n_tokens = static_cast<int>(split.train.n_codes);
    net.categories = CodeMatrix::kCategories;
    const Schedule schedule = build_schedule(cfg.schedule_kind, cfg.schedule_T, cfg.schedule_params);
    fs::create_directories(out);
    const std::string ckpt_file = (fs::path(out) / "model.ckpt").string();
    const Checkpoint ckpt = train(split, schedule, net, cfg.train, ckpt_file);
    std::printf("trained %d epochs, final validation negative ELBO %.6f, checkpoint %s\n",
                ckpt.epoch, ckpt.val_history.back(), ckpt_file.c_str());
    return 0;
  }

  if (cmd_sample->parsed()) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const CodeMatrix samples = sample_unconditional(ckpt, sample_n, Rng(seed));
    save_dataset(samples, sample_out);
    return 0;
  }

  if (cmd_guide->parsed()) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const ContextSpec context = ContextSpec::code_presence(guide_codes);
    const CodeMatrix samples = sample_guided(ckpt, context, guide_n, gcfg, Rng(seed));
    save_dataset(samples, guide_out);
    return 0;
  }

  if (cmd_eval->parsed()) {
    const CodeMatrix real = load_dataset(real_path);
    const CodeMatrix synth = load_dataset(synth_path);
    const auto [lo, hi] = parse_range(mcad_range);
    MmdConfig mmd_cfg;
    mmd_cfg.kernels = mmd_kernels;
    MetricReport report = fidelity_metrics(real, synth, mmd_cfg, mcad_bins, lo, hi);
    if (!prevalence_csv.empty()) write_prevalence_csv(real, synth, prevalence_csv);
    std::cout << report.to_json() << '\n';
    return 0;
  }

  if (cmd_attack->parsed()) {
    const CodeMatrix train_set = load_dataset(train_path);
    const CodeMatrix holdout = load_dataset(holdout_path);
    const CodeMatrix synth = load_dataset(synth_path);
    Rng rng(derive_seed(seed, 0xA77C));
    MetricReport report;
    report.values["air"] = attribute_inference_risk(train_set, synth, exposed, rng);
    report.values["mir"] = membership_inference_risk(train_set, holdout, synth, mir_threshold);
    report.sample_sizes["train"] = train_set.n_records;
    report.sample_sizes["holdout"] = holdout.n_records;
    report.sample_sizes["synth"] = synth.n_records;
    report.seeds["attack"] = std::to_string(seed);
    std::cout << report.to_json() << '\n';
    return 0;
  }

  if (cmd_utility->parsed()) {
    const CodeMatrix train_set = load_dataset(train_path);
    const CodeMatrix test_set = load_dataset(test_path);
    Mat x_train, x_test;
    std::vector<int> y_train, y_test;
    split_features(train_set, target_code, x_train, y_train);
    split_features(test_set, target_code, x_test, y_test);
    nlohmann::json rows;
    {
      const LogisticModel model = train_downstream(x_train, y_train, reg);
      const Vec scores = predict_proba(model, x_test);
      rows["real_trained"] = {{"auroc", auroc(scores, y_test)}, {"auprc", auprc(scores, y_test)}};
    }
    if (!synth_path.empty()) {
      const CodeMatrix synth = load_dataset(synth_path);
      Mat x_synth;
      std::vector<int> y_synth;
      split_features(synth, target_code, x_synth, y_synth);
      const LogisticModel model = train_downstream(x_synth, y_synth, reg);
      const Vec scores = predict_proba(model, x_test);
      rows["synthetic_trained"] = {{"auroc", auroc(scores, y_test)},
                                   {"auprc", auprc(scores, y_test)}};
    }
    std::cout << rows.dump() << '\n';
    return 0;
  }

  if (cmd_bench->parsed()) {
    const RunConfig cfg = load_config();
    run_experiment(cfg, out);
    std::printf("report written to %s\n", (fs::path(out) / "report.json").c_str());
    return 0;
  }

  return 0;
}

} // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == Error::Kind::Numeric ? 3 : 2;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: config parse: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
