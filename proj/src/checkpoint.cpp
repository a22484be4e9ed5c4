#include "ehrd3pm/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ehrd3pm/error.hpp"

namespace ehrd3pm {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'E', 'H', 'D', '3'};
constexpr std::uint32_t kVersion = 1;

// Raw tensor bytes are written as stored; this code targets little-endian
// hosts, matching the declared on-disk format.
void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

const char* to_string(PositionalKind kind) {
  switch (kind) {
    case PositionalKind::Full: return "full";
    case PositionalKind::Axial: return "axial";
    case PositionalKind::Category: return "category";
  }
  return "full";
}

PositionalKind pos_kind_from_string(const std::string& s) {
  if (s == "full") return PositionalKind::Full;
  if (s == "axial") return PositionalKind::Axial;
  if (s == "category") return PositionalKind::Category;
  throw_validation(Err::InvalidConfig, "unknown positional kind '" + s + "'");
}

json config_json(const DenoiserConfig& c) {
  return json{{"n_tokens", c.n_tokens},
              {"categories", c.categories},
              {"hidden", c.hidden},
              {"layers", c.layers},
              {"heads", c.heads},
              {"proj", c.proj},
              {"ff_hidden", c.ff_hidden},
              {"pos_kind", to_string(c.pos_kind)},
              {"axial_rows", c.axial_rows},
              {"axial_cols", c.axial_cols},
              {"shared_head", c.shared_head},
              {"time_injection",
               c.time_injection == TimeInjection::EveryLayer ? "every_layer" : "first_layer"},
              {"ln_eps", c.ln_eps}};
}

DenoiserConfig config_from(const json& j) {
  DenoiserConfig c;
  c.n_tokens = j.at("n_tokens").get<int>();
  c.categories = j.at("categories").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.proj = j.at("proj").get<int>();
  c.ff_hidden = j.at("ff_hidden").get<int>();
  c.pos_kind = pos_kind_from_string(j.at("pos_kind").get<std::string>());
  c.axial_rows = j.at("axial_rows").get<int>();
  c.axial_cols = j.at("axial_cols").get<int>();
  c.shared_head = j.at("shared_head").get<bool>();
  c.time_injection = j.at("time_injection").get<std::string>() == "every_layer"
                         ? TimeInjection::EveryLayer
                         : TimeInjection::FirstLayer;
  c.ln_eps = j.at("ln_eps").get<double>();
  return c;
}

void write_tensor(std::ostream& out, const Mat& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

void read_tensor(std::istream& in, Mat& m) {
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  if (!in) throw_validation(Err::IoFailure, "truncated tensor section");
}

} // namespace

std::string config_to_json(const DenoiserConfig& config) { return config_json(config).dump(); }

DenoiserConfig config_from_json(const std::string& text) {
  return config_from(json::parse(text));
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json meta;
  meta["net"] = config_json(ckpt.config());
  meta["schedule"] = json{{"horizon", ckpt.schedule.horizon}};
  meta["epoch"] = ckpt.epoch;
  meta["adam_step"] = ckpt.adam.step;
  meta["train_history"] = ckpt.train_history;
  meta["val_history"] = ckpt.val_history;

  json manifest = json::array();
  const auto record = [&manifest](const char* name, const Mat& m) {
    manifest.push_back(json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  };
  record("schedule.retention", ckpt.schedule.retention);
  int idx = 0;
  for_each_tensor(const_cast<DenoiserParams&>(ckpt.params), [&](Mat& m) {
    record(("params." + std::to_string(idx++)).c_str(), m);
  });
  idx = 0;
  for_each_tensor(const_cast<DenoiserParams&>(ckpt.adam.m), [&](Mat& m) {
    record(("adam_m." + std::to_string(idx++)).c_str(), m);
  });
  idx = 0;
  for_each_tensor(const_cast<DenoiserParams&>(ckpt.adam.v), [&](Mat& m) {
    record(("adam_v." + std::to_string(idx++)).c_str(), m);
  });
  meta["tensors"] = manifest;

  const std::string blob = meta.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_validation(Err::IoFailure, "cannot write checkpoint " + tmp);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u64(out, blob.size());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));

    Mat retention = ckpt.schedule.retention;
    write_tensor(out, retention);
    for_each_tensor(const_cast<DenoiserParams&>(ckpt.params),
                    [&](Mat& m) { write_tensor(out, m); });
    for_each_tensor(const_cast<DenoiserParams&>(ckpt.adam.m),
                    [&](Mat& m) { write_tensor(out, m); });
    for_each_tensor(const_cast<DenoiserParams&>(ckpt.adam.v),
                    [&](Mat& m) { write_tensor(out, m); });
    if (!out) throw_validation(Err::IoFailure, "checkpoint write failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw_validation(Err::IoFailure, "cannot move checkpoint into place at " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_validation(Err::IoFailure, "cannot open checkpoint " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw_validation(Err::MalformedHeader, "bad checkpoint magic");
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw_validation(Err::MalformedHeader, "unsupported checkpoint version");
  const std::uint64_t len = read_u64(in);
  std::string blob(len, '\0');
  in.read(blob.data(), static_cast<std::streamsize>(len));
  if (!in) throw_validation(Err::MalformedHeader, "truncated checkpoint metadata");

  json meta = json::parse(blob);
  Checkpoint ckpt;
  const DenoiserConfig cfg = config_from(meta.at("net"));
  cfg.validate();
  ckpt.params = init_params(cfg, 0); // allocate shapes, values overwritten below
  ckpt.adam.m = ckpt.params.zeros_like();
  ckpt.adam.v = ckpt.params.zeros_like();
  ckpt.adam.step = meta.at("adam_step").get<std::int64_t>();
  ckpt.epoch = meta.at("epoch").get<int>();
  ckpt.train_history = meta.at("train_history").get<std::vector<double>>();
  ckpt.val_history = meta.at("val_history").get<std::vector<double>>();

  const Index horizon = meta.at("schedule").at("horizon").get<Index>();
  Mat retention(horizon, 1);
  read_tensor(in, retention);
  ckpt.schedule = Schedule::from_retention(retention.col(0));

  for_each_tensor(ckpt.params, [&](Mat& m) { read_tensor(in, m); });
  for_each_tensor(ckpt.adam.m, [&](Mat& m) { read_tensor(in, m); });
  for_each_tensor(ckpt.adam.v, [&](Mat& m) { read_tensor(in, m); });
  return ckpt;
}

} // namespace ehrd3pm
