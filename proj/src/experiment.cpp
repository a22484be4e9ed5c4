#include "ehrd3pm/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ehrd3pm/downstream.hpp"
#include "ehrd3pm/error.hpp"
#include "ehrd3pm/privacy.hpp"

namespace ehrd3pm {

using nlohmann::json;

namespace {

template <class F>
auto stage(const char* name, F&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), e.kind(), std::string("stage ") + name + ": " + e.what());
  }
}

Vec json_to_vec(const json& arr) {
  Vec v(arr.size());
  Index i = 0;
  for (const auto& x : arr) v[i++] = x.get<double>();
  return v;
}

MixtureSpec mixture_from_json(const json& j) {
  MixtureSpec spec;
  spec.weights = json_to_vec(j.at("weights"));
  const auto& rows = j.at("probs");
  require(!rows.empty(), Err::InvalidSpec, "mixture needs probability rows");
  spec.probs.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  Index r = 0;
  for (const auto& row : rows) {
    require(static_cast<Index>(row.size()) == spec.probs.cols(), Err::InvalidSpec,
            "ragged mixture probability rows");
    Index c = 0;
    for (const auto& x : row) spec.probs(r, c++) = x.get<double>();
    ++r;
  }
  spec.validate();
  return spec;
}

json mixture_to_json(const MixtureSpec& spec) {
  json j;
  for (Index m = 0; m < spec.weights.size(); ++m) j["weights"].push_back(spec.weights[m]);
  for (Index m = 0; m < spec.probs.rows(); ++m) {
    json row = json::array();
    for (Index c = 0; c < spec.probs.cols(); ++c) row.push_back(spec.probs(m, c));
    j["probs"].push_back(row);
  }
  return j;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

} // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j = json::parse(json_text);
  RunConfig cfg;

  const json data = j.value("data", json::object());
  if (data.contains("mixture"))
    cfg.mixture = mixture_from_json(data.at("mixture"));
  else if (data.contains("path"))
    cfg.dataset_path = data.at("path").get<std::string>();
  else
    throw_validation(Err::InvalidSpec, "data section needs 'mixture' or 'path'");
  cfg.n_train = get_or<Index>(data, "n_train", cfg.n_train);
  cfg.n_valid = get_or<Index>(data, "n_valid", cfg.n_valid);
  cfg.n_test = get_or<Index>(data, "n_test", cfg.n_test);
  cfg.data_seed = get_or<std::uint64_t>(data, "seed", cfg.data_seed);

  const json sched = j.value("schedule", json::object());
  cfg.schedule_kind = schedule_kind_from_string(get_or<std::string>(sched, "kind", "cosine"));
  cfg.schedule_T = get_or<Index>(sched, "T", cfg.schedule_T);
  cfg.schedule_params.cosine_s = get_or<double>(sched, "cosine_s", cfg.schedule_params.cosine_s);
  cfg.schedule_params.linear_abar_start =
      get_or<double>(sched, "linear_abar_start", cfg.schedule_params.linear_abar_start);
  cfg.schedule_params.linear_abar_end =
      get_or<double>(sched, "linear_abar_end", cfg.schedule_params.linear_abar_end);

  const json net = j.value("net", json::object());
  cfg.net.hidden = get_or<int>(net, "hidden", 32);
  cfg.net.layers = get_or<int>(net, "layers", 2);
  cfg.net.heads = get_or<int>(net, "heads", 4);
  cfg.net.proj = get_or<int>(net, "proj", 8);
  cfg.net.ff_hidden = get_or<int>(net, "ff_hidden", 0);
  const std::string pos = get_or<std::string>(net, "pos_kind", "full");
  cfg.net.pos_kind = pos == "axial"      ? PositionalKind::Axial
                     : pos == "category" ? PositionalKind::Category
                                         : PositionalKind::Full;
  cfg.net.axial_rows = get_or<int>(net, "axial_rows", 0);
  cfg.net.axial_cols = get_or<int>(net, "axial_cols", 0);
  cfg.net.shared_head = get_or<bool>(net, "shared_head", true);
  cfg.net.time_injection = get_or<std::string>(net, "time_injection", "every_layer") == "first_layer"
                               ? TimeInjection::FirstLayer
                               : TimeInjection::EveryLayer;
  cfg.net.ln_eps = get_or<double>(net, "ln_eps", 1e-5);

  const json train = j.value("train", json::object());
  cfg.train.lr = get_or<double>(train, "lr", cfg.train.lr);
  cfg.train.weight_decay = get_or<double>(train, "weight_decay", cfg.train.weight_decay);
  cfg.train.lr_decay = get_or<double>(train, "lr_decay", cfg.train.lr_decay);
  cfg.train.batch_size = get_or<int>(train, "batch_size", cfg.train.batch_size);
  cfg.train.epochs = get_or<int>(train, "epochs", cfg.train.epochs);
  cfg.train.clip_norm = get_or<double>(train, "clip_norm", cfg.train.clip_norm);
  cfg.train.seed = get_or<std::uint64_t>(train, "seed", cfg.train.seed);
  cfg.train.verbose = get_or<bool>(train, "verbose", false);

  const json sample = j.value("sample", json::object());
  cfg.sample_n = get_or<Index>(sample, "n", cfg.sample_n);
  cfg.sample_seed = get_or<std::uint64_t>(sample, "seed", cfg.sample_seed);

  const json guidance = j.value("guidance", json::object());
  cfg.guidance_target = get_or<int>(guidance, "target_code", cfg.guidance_target);
  cfg.guidance.steps = get_or<int>(guidance, "steps", cfg.guidance.steps);
  cfg.guidance.eta = get_or<double>(guidance, "eta", cfg.guidance.eta);
  cfg.guidance.lambda = get_or<double>(guidance, "lambda", cfg.guidance.lambda);
  cfg.guidance.tau = get_or<double>(guidance, "tau", cfg.guidance.tau);
  cfg.guidance_n = get_or<Index>(guidance, "n", cfg.guidance_n);
  cfg.guidance_seed = get_or<std::uint64_t>(guidance, "seed", cfg.guidance_seed);

  const json attack = j.value("attack", json::object());
  cfg.attack_exposed = get_or<int>(attack, "exposed", cfg.attack_exposed);
  cfg.mir_threshold = get_or<double>(attack, "mir_threshold", cfg.mir_threshold);
  cfg.attack_seed = get_or<std::uint64_t>(attack, "seed", cfg.attack_seed);

  const json utility = j.value("utility", json::object());
  cfg.utility_target = get_or<int>(utility, "target_code", cfg.utility_target);
  cfg.utility_reg = get_or<double>(utility, "reg", cfg.utility_reg);

  const json eval = j.value("eval", json::object());
  cfg.mmd_config.kernels = get_or<int>(eval, "mmd_kernels", cfg.mmd_config.kernels);
  cfg.mcad_bins = get_or<int>(eval, "mcad_bins", cfg.mcad_bins);
  cfg.mcad_lo = get_or<double>(eval, "mcad_lo", cfg.mcad_lo);
  cfg.mcad_hi = get_or<double>(eval, "mcad_hi", cfg.mcad_hi);

  cfg.threads = get_or<int>(j, "threads", 0);
  cfg.train.threads = cfg.threads;

  // normalized round trip so equivalent documents share one digest
  json canon = j;
  if (!cfg.dataset_path.empty())
    canon["data"]["path"] = cfg.dataset_path;
  else
    canon["data"]["mixture"] = mixture_to_json(cfg.mixture);
  cfg.canonical_json = canon.dump();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_validation(Err::IoFailure, "cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

MetricReport fidelity_metrics(const CodeMatrix& real, const CodeMatrix& synth,
                              const MmdConfig& mmd_config, int mcad_bins, double lo, double hi) {
  MetricReport report;
  report.values["spearman_prevalence"] = spearman(prevalence(real), prevalence(synth));
  report.values["cmd"] = cmd(real, synth);
  bool degenerate = false;
  report.values["mmd"] = mmd(real, synth, mmd_config, &degenerate);
  report.flags["mmd_degenerate_bandwidth"] = degenerate;
  report.values["mcad"] = mcad(real, synth, mcad_bins, lo, hi);
  report.sample_sizes["real"] = real.n_records;
  report.sample_sizes["synth"] = synth.n_records;
  return report;
}

MetricReport evaluate_samples(const CodeMatrix& synth, const DatasetSplit& real,
                              const RunConfig& config) {
  MetricReport report = fidelity_metrics(real.test, synth, config.mmd_config, config.mcad_bins,
                                         config.mcad_lo, config.mcad_hi);

  const int exposed =
      std::min<int>(config.attack_exposed, static_cast<int>(real.train.n_codes) - 1);
  Rng attack_rng(derive_seed(config.attack_seed, 0xA77C));
  report.values["air"] = attribute_inference_risk(real.test, synth, exposed, attack_rng);
  report.values["mir"] =
      membership_inference_risk(real.train, real.test, synth, config.mir_threshold);

  Mat x_synth, x_test;
  std::vector<int> y_synth, y_test;
  split_features(synth, config.utility_target, x_synth, y_synth);
  split_features(real.test, config.utility_target, x_test, y_test);
  const LogisticModel model = train_downstream(x_synth, y_synth, config.utility_reg);
  const Vec scores = predict_proba(model, x_test);
  report.values["auroc"] = auroc(scores, y_test);
  report.values["auprc"] = auprc(scores, y_test);

  report.seeds["attack"] = std::to_string(config.attack_seed);
  report.config_digests["run_config"] = digest_hex(config.canonical_json);
  return report;
}

void write_prevalence_csv(const CodeMatrix& real, const CodeMatrix& synth,
                          const std::string& path) {
  require(real.n_codes == synth.n_codes, Err::ShapeMismatch, "code counts differ");
  const Vec pr = prevalence(real);
  const Vec ps = prevalence(synth);
  std::ofstream out(path);
  if (!out) throw_validation(Err::IoFailure, "cannot write " + path);
  out << "code,real_prev,synth_prev\n";
  for (Index c = 0; c < real.n_codes; ++c)
    out << c << ',' << pr[c] << ',' << ps[c] << '\n';
}

namespace {

json report_to_json_obj(const MetricReport& report) { return json::parse(report.to_json()); }

json utility_row(const Mat& x_train, const std::vector<int>& y_train, const Mat& x_test,
                 const std::vector<int>& y_test, double reg) {
  const LogisticModel model = train_downstream(x_train, y_train, reg);
  const Vec scores = predict_proba(model, x_test);
  return json{{"auroc", auroc(scores, y_test)},
              {"auprc", auprc(scores, y_test)},
              {"n_train", x_train.rows()}};
}

} // namespace

std::string run_experiment(const RunConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  // --- data ---
  DatasetSplit split = stage("gen-data", [&] {
    CodeMatrix all;
    if (!config.dataset_path.empty()) {
      all = load_dataset(config.dataset_path);
    } else {
      const Index total = config.n_train + config.n_valid + config.n_test;
      all = gen_ground_truth(config.mixture, total, config.data_seed).data;
    }
    require(config.n_train + config.n_valid <= all.n_records, Err::InvalidSpec,
            "split sizes exceed generated records");
    return split_dataset(all, config.n_train, config.n_valid, config.data_seed);
  });

  const bool have_mixture = config.dataset_path.empty();

  // --- train ---
  DenoiserConfig net = config.net;
  net.n_tokens = static_cast<int>(split.train.n_codes);
  net.categories = CodeMatrix::kCategories;
  const Schedule schedule =
      build_schedule(config.schedule_kind, config.schedule_T, config.schedule_params);
  const Checkpoint ckpt = stage("train", [&] {
    return train(split, schedule, net, config.train, (fs::path(out_dir) / "model.ckpt").string());
  });

  // --- sample ---
  const CodeMatrix synth = stage("sample", [&] {
    return sample_unconditional(ckpt, config.sample_n, Rng(config.sample_seed), config.threads);
  });
  stage("sample", [&] {
    save_dataset(synth, (fs::path(out_dir) / "samples_unconditional.txt").string());
    write_prevalence_csv(split.test, synth,
                         (fs::path(out_dir) / "prevalence_unconditional.csv").string());
    return 0;
  });

  // --- guided sample ---
  const ContextSpec context = ContextSpec::code_presence(config.guidance_target);
  const CodeMatrix guided = stage("guide", [&] {
    return sample_guided(ckpt, context, config.guidance_n, config.guidance,
                         Rng(config.guidance_seed), config.threads);
  });
  stage("guide", [&] {
    save_dataset(guided, (fs::path(out_dir) / "samples_guided.txt").string());
    write_prevalence_csv(split.test, guided, (fs::path(out_dir) / "prevalence_guided.csv").string());
    return 0;
  });

  // --- evaluate both sample sets ---
  const MetricReport eval_uncond =
      stage("eval", [&] { return evaluate_samples(synth, split, config); });
  const MetricReport eval_guided =
      stage("eval", [&] { return evaluate_samples(guided, split, config); });

  // --- utility table: real vs synthetic vs augmented training data ---
  json utility = stage("utility", [&] {
    Mat x_real, x_synth, x_test, x_aug;
    std::vector<int> y_real, y_synth, y_test, y_aug;
    split_features(split.train, config.utility_target, x_real, y_real);
    split_features(synth, config.utility_target, x_synth, y_synth);
    split_features(split.test, config.utility_target, x_test, y_test);
    x_aug.resize(x_real.rows() + x_synth.rows(), x_real.cols());
    x_aug << x_real, x_synth;
    y_aug = y_real;
    y_aug.insert(y_aug.end(), y_synth.begin(), y_synth.end());
    json rows;
    rows["real_trained"] = utility_row(x_real, y_real, x_test, y_test, config.utility_reg);
    rows["synthetic_trained"] = utility_row(x_synth, y_synth, x_test, y_test, config.utility_reg);
    rows["augmented"] = utility_row(x_aug, y_aug, x_test, y_test, config.utility_reg);
    return rows;
  });

  // --- guidance uplift ---
  json uplift = stage("guidance-uplift", [&] {
    const Vec prev_synth = prevalence(synth);
    const Vec prev_guided = prevalence(guided);
    const Vec prev_real = prevalence(split.test);
    json u;
    u["target_code"] = config.guidance_target;
    u["real_prevalence"] = prev_real[config.guidance_target];
    u["unconditional_prevalence"] = prev_synth[config.guidance_target];
    u["guided_prevalence"] = prev_guided[config.guidance_target];
    u["uplift_ratio"] = prev_synth[config.guidance_target] > 0.0
                            ? prev_guided[config.guidance_target] / prev_synth[config.guidance_target]
                            : 0.0;
    if (have_mixture) {
      u["analytic_prevalence"] = mixture_prevalence(config.mixture)[config.guidance_target];
      const Vec cond = conditional_prevalence(config.mixture, config.guidance_target);
      json cond_rows = json::array();
      for (Index c = 0; c < cond.size(); ++c) cond_rows.push_back(cond[c]);
      u["conditional_prevalence"] = cond_rows;
    }
    return u;
  });

  json report;
  report["config_digest"] = digest_hex(config.canonical_json);
  report["seeds"] = json{{"data", config.data_seed},
                         {"train", config.train.seed},
                         {"sample", config.sample_seed},
                         {"guidance", config.guidance_seed},
                         {"attack", config.attack_seed}};
  report["training"] = json{{"epochs", ckpt.epoch},
                            {"train_history", ckpt.train_history},
                            {"val_history", ckpt.val_history},
                            {"parameters", parameter_count(ckpt.config())}};
  report["unconditional"] = report_to_json_obj(eval_uncond);
  report["guided"] = report_to_json_obj(eval_guided);
  report["utility"] = utility;
  report["guidance_uplift"] = uplift;
  if (have_mixture) {
    const Vec p = mixture_prevalence(config.mixture);
    json prev = json::array();
    for (Index c = 0; c < p.size(); ++c) prev.push_back(p[c]);
    report["analytic_prevalence"] = prev;
  }

  const std::string text = report.dump(2);
  std::ofstream out(fs::path(out_dir) / "report.json");
  if (!out) throw_validation(Err::IoFailure, "cannot write report.json");
  out << text << '\n';
  return text;
}

} // namespace ehrd3pm
