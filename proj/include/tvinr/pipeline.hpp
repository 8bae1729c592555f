// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvinr/bench.hpp"
#include "tvinr/checkpoint.hpp"
#include "tvinr/common.hpp"
#include "tvinr/feature_coreset.hpp"
#include "tvinr/json_fields.hpp"
#include "tvinr/occupancy.hpp"
#include "tvinr/png.hpp"
#include "tvinr/renderer.hpp"
#include "tvinr/train.hpp"
#include "tvinr/volume_io.hpp"

namespace tvinr::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kCoresetName = "coreset.bin";
inline constexpr const char* kCheckpointName = "model.ckpt";
inline constexpr const char* kLossName = "loss.csv";

struct DatasetConfig {
  std::string name;
  fs::path volume, meta;       // raw f32 volume + JSON sidecar
  std::string synthetic;       // "moving_gaussian"
  Dims3 synth_dims{32, 32, 32};
  std::int64_t synth_frames = 8;
  io::BlobPath synth_path{{-0.5, -0.1, 0.0}, {0.5, 0.2, 0.0}, 0.35};
};

struct KeyFrameConfig {
  std::string policy = "uniform";  // uniform | select | explicit
  std::int64_t count = 4;
  std::vector<std::int64_t> indices;
};

struct RenderConfig {
  fs::path checkpoint;  // default <output_dir>/model.ckpt
  fs::path out;         // default <output_dir>/render.png
  double t = 0.0;
  std::string times;    // "a:b:step" sweep
  bool extrapolate = false;
  render::Camera camera{};
  std::string tf_id = "hot";
  std::optional<render::TransferFunction> tf;
  render::ArmConfig arm{};
};

struct BenchConfig {
  std::vector<DatasetConfig> datasets;  // empty: the moving-Gaussian benchmark
  fs::path out;                         // default <output_dir>/bench
  int seeds = 5;
  int repeats = 5;
  double target_psnr = 30.0;
  int render_size = 128;
};

struct ServeConfig {
  fs::path checkpoint;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::int64_t max_pixels = 1024 * 1024;
  int threads = 8;
  int render_threads = 1;
};

struct JobConfig {
  DatasetConfig dataset;
  coreset::FeatureSpec feature = coreset::FeatureSpec::segmentation(0.5);
  KeyFrameConfig keys;
  std::int64_t fold = 2;
  std::int64_t embedding_size = 2;
  nn::MlpConfig mlp{};
  nn::TrainConfig train{};
  int psnr_every = 0;
  fs::path manifest;  // default <output_dir>/manifest.json
  fs::path output_dir = "out";
  std::uint64_t seed = 0;
  bool deterministic = false;
  RenderConfig render;
  BenchConfig bench;
  ServeConfig serve;

  fs::path manifest_path() const { return manifest.empty() ? output_dir / kManifestName : manifest; }
  fs::path checkpoint_path() const { return render.checkpoint.empty() ? output_dir / kCheckpointName : render.checkpoint; }
};

namespace detail {

inline DatasetConfig parse_dataset(const Fields& f) {
  f.reject_unknown({"name", "volume", "meta", "synthetic", "dims", "frames", "start", "end", "sigma"});
  DatasetConfig d;
  d.volume = f.string("volume", "");
  d.meta = f.string("meta", "");
  d.synthetic = f.string("synthetic", "");
  if (!d.synthetic.empty() && d.synthetic != "moving_gaussian")
    throw FieldError(f.path("synthetic"), "unknown synthetic dataset '" + d.synthetic + "' (available: moving_gaussian)");
  if (d.synthetic.empty() && d.volume.empty()) throw FieldError(f.path("volume"), "required unless 'synthetic' is set");
  if (!d.volume.empty() && d.meta.empty()) d.meta = fs::path(d.volume).replace_extension(".json");
  if (f.has("dims")) {
    const auto v = f.integers("dims");
    if (v.size() != 3) throw FieldError(f.path("dims"), "expected [x, y, z]");
    d.synth_dims = {v[0], v[1], v[2]};
  }
  d.synth_frames = f.integer("frames", d.synth_frames);
  d.synth_path.start = f.vec3("start", d.synth_path.start);
  d.synth_path.end = f.vec3("end", d.synth_path.end);
  d.synth_path.sigma = f.number("sigma", d.synth_path.sigma);
  d.name = f.string("name", d.synthetic.empty() ? fs::path(d.volume).stem().string() : d.synthetic);
  return d;
}

inline render::Camera parse_camera(const Fields& f) {
  f.reject_unknown({"eye", "target", "up", "fov"});
  render::Camera c;
  c.eye = f.vec3("eye", c.eye);
  c.target = f.vec3("target", c.target);
  c.up = f.vec3("up", c.up);
  c.fov_deg = f.number("fov", c.fov_deg);
  return c;
}

}  // namespace detail

/// Transfer function given as an id string or inline control points.
inline std::pair<std::string, std::optional<render::TransferFunction>> parse_transfer_function(const Fields& parent,
                                                                                                const std::string& key,
                                                                                                const std::string& def) {
  if (!parent.has(key)) return {def, std::nullopt};
  const auto& v = parent.raw(key);
  if (v.is_string()) {
    const auto id = v.get<std::string>();
    try {
      render::builtin_transfer_function(id);
    } catch (const ArgumentError& e) {
      throw FieldError(parent.path(key), e.what());
    }
    return {id, std::nullopt};
  }
  try {
    return {"inline", render::TransferFunction::from_json(v)};
  } catch (const nlohmann::json::exception&) {
    throw FieldError(parent.path(key), "control points need numeric scalar, r, g, b, a");
  } catch (const ArgumentError& e) {
    throw FieldError(parent.path(key), e.what());
  }
}

inline JobConfig parse_job_config(const json& doc) {
  const Fields root(doc, "");
  root.reject_unknown({"dataset", "feature", "key_frames", "encoder", "mlp", "train", "output_dir", "manifest", "seed",
                       "deterministic", "render", "bench", "serve"});
  JobConfig c;
  if (root.has("dataset")) c.dataset = detail::parse_dataset(root.object("dataset"));
  if (root.has("feature")) {
    try {
      c.feature = coreset::feature_from_json(root.raw("feature"));
    } catch (const nlohmann::json::exception& e) {
      throw FieldError("feature", e.what());
    } catch (const ArgumentError& e) {
      throw FieldError("feature", e.what());
    }
  }
  {
    const auto k = root.object("key_frames");
    k.reject_unknown({"policy", "count", "indices"});
    c.keys.policy = k.string("policy", c.keys.policy);
    if (c.keys.policy != "uniform" && c.keys.policy != "select" && c.keys.policy != "explicit")
      throw FieldError(k.path("policy"), "expected uniform, select or explicit");
    c.keys.count = k.integer("count", c.keys.count);
    c.keys.indices = k.integers("indices");
    if (c.keys.policy == "explicit" && c.keys.indices.empty()) throw FieldError(k.path("indices"), "required for explicit policy");
  }
  {
    const auto e = root.object("encoder");
    e.reject_unknown({"fold", "embedding_size"});
    c.fold = e.integer_in("fold", c.fold, 2, 64);
    c.embedding_size = e.integer_in("embedding_size", c.embedding_size, 1, 64);
  }
  {
    const auto m = root.object("mlp");
    m.reject_unknown({"hidden_layers", "neurons_per_layer"});
    c.mlp.hidden_layers = static_cast<int>(m.integer_in("hidden_layers", c.mlp.hidden_layers, 0, 16));
    c.mlp.neurons_per_layer = static_cast<int>(m.integer_in("neurons_per_layer", c.mlp.neurons_per_layer, 1, 4096));
  }
  {
    const auto t = root.object("train");
    t.reject_unknown({"learning_rate", "batch_size", "max_epochs", "beta1", "beta2", "epsilon", "psnr_every", "preset"});
    if (t.string("preset", "desk") == "paper") c.train.batch_size = nn::TrainConfig::kPaperBatchSize;
    else if (t.string("preset", "desk") != "desk") throw FieldError(t.path("preset"), "expected desk or paper");
    c.train.learning_rate = t.number("learning_rate", c.train.learning_rate);
    c.train.batch_size = static_cast<std::size_t>(
        t.integer_in("batch_size", static_cast<std::int64_t>(c.train.batch_size), 1, std::int64_t{1} << 30));
    c.train.max_epochs = static_cast<int>(t.integer_in("max_epochs", c.train.max_epochs, 0, 1000000));
    c.train.beta1 = t.number("beta1", c.train.beta1);
    c.train.beta2 = t.number("beta2", c.train.beta2);
    c.train.epsilon = t.number("epsilon", c.train.epsilon);
    c.psnr_every = static_cast<int>(t.integer_in("psnr_every", 0, 0, 1000000));
    try {
      c.train.validate();
    } catch (const ArgumentError& e) {
      throw FieldError("train", e.what());
    }
  }
  c.output_dir = root.string("output_dir", c.output_dir.string());
  c.manifest = root.string("manifest", "");
  if (root.has("seed")) {
    const auto& s = root.raw("seed");
    if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0))
      throw FieldError("seed", "expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  c.deterministic = root.boolean("deterministic", c.deterministic);
  {
    const auto r = root.object("render");
    r.reject_unknown({"checkpoint", "out", "t", "times", "extrapolate", "camera", "transfer_function", "width", "height",
                      "step", "adaptive", "skip_empty", "background", "threads", "budget", "pace_cap"});
    c.render.checkpoint = r.string("checkpoint", "");
    c.render.out = r.string("out", "");
    c.render.t = r.number("t", c.render.t);
    c.render.times = r.string("times", "");
    c.render.extrapolate = r.boolean("extrapolate", false);
    if (r.has("camera")) c.render.camera = detail::parse_camera(r.object("camera"));
    c.render.camera.width = static_cast<int>(r.integer_in("width", 256, 1, 16384));
    c.render.camera.height = static_cast<int>(r.integer_in("height", 256, 1, 16384));
    std::tie(c.render.tf_id, c.render.tf) = parse_transfer_function(r, "transfer_function", c.render.tf_id);
    c.render.arm.step = r.number("step", 0.0);
    if (c.render.arm.step < 0.0) throw FieldError(r.path("step"), "must be >= 0");
    c.render.arm.adaptive = r.boolean("adaptive", true);
    c.render.arm.skip_empty = r.boolean("skip_empty", true);
    c.render.arm.budget = r.integer_in("budget", 0, 0, std::int64_t{1} << 40);
    c.render.arm.pace_cap = r.integer_in("pace_cap", c.render.arm.pace_cap, 1, 4096);
    c.render.arm.threads = static_cast<int>(r.integer_in("threads", 0, 0, 1024));
    if (r.has("background")) {
      const auto b = r.vec3("background", {0, 0, 0});
      c.render.arm.background = {static_cast<float>(b.x), static_cast<float>(b.y), static_cast<float>(b.z), 1.0f};
    }
  }
  {
    const auto b = root.object("bench");
    b.reject_unknown({"datasets", "out", "seeds", "repeats", "target_psnr", "render_size"});
    if (b.has("datasets")) {
      const auto& arr = b.raw("datasets");
      if (!arr.is_array()) throw FieldError(b.path("datasets"), "expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto p = b.path("datasets") + "[" + std::to_string(i) + "]";
        if (arr[i].is_string()) {
          const json obj{{"synthetic", arr[i].get<std::string>()}};
          c.bench.datasets.push_back(detail::parse_dataset(Fields(obj, p)));
        } else {
          c.bench.datasets.push_back(detail::parse_dataset(Fields(arr[i], p)));
        }
      }
    }
    c.bench.out = b.string("out", "");
    c.bench.seeds = static_cast<int>(b.integer_in("seeds", c.bench.seeds, 1, 1000));
    c.bench.repeats = static_cast<int>(b.integer_in("repeats", c.bench.repeats, 1, 1000));
    c.bench.target_psnr = b.number("target_psnr", c.bench.target_psnr);
    c.bench.render_size = static_cast<int>(b.integer_in("render_size", c.bench.render_size, 1, 4096));
  }
  {
    const auto s = root.object("serve");
    s.reject_unknown({"checkpoint", "host", "port", "max_pixels", "threads", "render_threads"});
    c.serve.checkpoint = s.string("checkpoint", "");
    c.serve.host = s.string("host", c.serve.host);
    c.serve.port = static_cast<int>(s.integer_in("port", c.serve.port, 0, 65535));
    c.serve.max_pixels = s.integer_in("max_pixels", c.serve.max_pixels, 1, std::int64_t{1} << 26);
    c.serve.threads = static_cast<int>(s.integer_in("threads", c.serve.threads, 1, 256));
    c.serve.render_threads = static_cast<int>(s.integer_in("render_threads", c.serve.render_threads, 0, 256));
  }
  return c;
}

inline json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ArgumentError("cannot open " + p.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw FormatError("malformed JSON in " + p.string());
  return j;
}

inline void write_text_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + p.string());
  out << text;
  if (!out) throw FormatError("failed writing " + p.string());
}

inline void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ArgumentError(what + " not found: " + p.string());
}

inline io::Volume4D load_dataset(const DatasetConfig& d) {
  if (!d.synthetic.empty()) {
    auto v = io::synth_moving_gaussian(d.synth_dims, d.synth_frames, d.synth_path);
    v.meta.dataset_name = d.name;
    return v;
  }
  require_file(d.volume, "dataset file");
  require_file(d.meta, "dataset metadata file");
  return io::load_volume(d.volume, d.meta);
}

inline io::KeyFrameSet choose_key_frames(const io::Volume4D& vol, const KeyFrameConfig& k) {
  if (k.policy == "explicit") {
    io::KeyFrameSet s{k.indices};
    s.validate(vol.meta.num_frames);
    return s;
  }
  if (k.policy == "select") return io::select_key_frames(vol, k.count);
  return io::uniform_key_frames(vol.meta.num_frames, k.count);
}

// ---------------------------------------------------------------- extract

struct ExtractResult {
  json manifest;
  coreset::CoresetResult coreset;
};

/// Coreset + per-key occupancy + manifest into the output directory.
inline ExtractResult cmd_extract(const JobConfig& cfg, std::ostream& log) {
  const auto vol = load_dataset(cfg.dataset);
  const auto keys = choose_key_frames(vol, cfg.keys);
  auto cs = coreset::build_coreset(vol, keys, cfg.feature);
  fs::create_directories(cfg.output_dir);
  coreset::save_coreset(cs.coreset, cfg.output_dir / kCoresetName);
  json occ = json::array();
  for (std::size_t k = 0; k < cs.occupancy.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "occupancy_%03zu.bin", k);
    coreset::save_occupancy(cs.occupancy[k], cfg.output_dir / name);
    occ.push_back({{"file", name}, {"time", cs.key_times[k]}, {"frame", keys.indices[k]}, {"cells", cs.occupancy[k].popcount()}});
  }
  const auto& d = vol.meta.dims;
  const double total = static_cast<double>(d.count()) * static_cast<double>(keys.size());
  json m{{"format", "tvinr-manifest"},
         {"version", 1},
         {"dataset", {{"name", vol.meta.dataset_name}, {"dims", {d.x, d.y, d.z}}, {"frames", vol.meta.num_frames}}},
         {"feature", coreset::feature_to_json(cfg.feature)},
         {"key_frames", keys.indices},
         {"key_times", cs.key_times},
         {"fbb", coreset::fbb_to_json(cs.fbb)},
         {"coreset",
          {{"file", kCoresetName},
           {"samples", cs.coreset.size()},
           {"fraction", static_cast<double>(cs.coreset.size()) / total},
           {"hash", nn::coreset_hash(cs.coreset)}}},
         {"occupancy", occ}};
  write_text_file(cfg.output_dir / kManifestName, m.dump(2) + "\n");
  log << "coreset: " << cs.coreset.size() << " samples (" << std::fixed << std::setprecision(1)
      << 100.0 * static_cast<double>(cs.coreset.size()) / total << "% of key-frame vertices)\n"
      << "fbb: " << cs.fbb.sizes().x << "x" << cs.fbb.sizes().y << "x" << cs.fbb.sizes().z << "\n"
      << "manifest: " << (cfg.output_dir / kManifestName).string() << "\n";
  log.unsetf(std::ios::fixed);
  return {std::move(m), std::move(cs)};
}

struct Manifest {
  fs::path dir;
  json doc;
  coreset::FeatureBoundingBox fbb;
  std::vector<double> key_times;
  std::vector<std::string> occupancy_files;
  fs::path coreset_file;
  std::string coreset_hash;
};

inline Manifest read_manifest(const fs::path& path) {
  require_file(path, "manifest");
  Manifest m;
  m.dir = path.parent_path();
  m.doc = read_json_file(path);
  try {
    if (m.doc.at("format") != "tvinr-manifest") throw FormatError("not a tvinr manifest: " + path.string());
    if (m.doc.at("version") != 1) throw FormatError("unsupported manifest version in " + path.string());
    m.fbb = coreset::fbb_from_json(m.doc.at("fbb"));
    m.key_times = m.doc.at("key_times").get<std::vector<double>>();
    for (const auto& o : m.doc.at("occupancy")) m.occupancy_files.push_back(o.at("file").get<std::string>());
    m.coreset_file = m.dir / m.doc.at("coreset").at("file").get<std::string>();
    m.coreset_hash = m.doc.at("coreset").at("hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

// ------------------------------------------------------------------ train

struct TrainOutcome {
  nn::FloatModel model;
  nn::CheckpointMeta meta;
  nn::TrainResult result;
};

/// Trains from the manifest's coreset and writes model.ckpt + loss.csv.
/// With `resume`, continues from an existing checkpoint in the output
/// directory; epoch numbers carry on from the stored count.
inline TrainOutcome cmd_train(const JobConfig& cfg, bool resume, std::ostream& log) {
  const auto man = read_manifest(cfg.manifest_path());
  require_file(man.coreset_file, "coreset file");
  const auto data = coreset::load_coreset(man.coreset_file);
  const auto hash = nn::coreset_hash(data);
  if (hash != man.coreset_hash) throw DataError("coreset " + man.coreset_file.string() + " does not match its manifest hash");

  fs::create_directories(cfg.output_dir);
  const auto ckpt = cfg.output_dir / kCheckpointName;
  TrainOutcome out;
  int first_epoch = 0;
  if (resume) {
    require_file(ckpt, "checkpoint to resume");
    auto ck = nn::load_checkpoint<float>(ckpt);
    if (ck.meta.dataset_hash != hash) throw DataError("checkpoint " + ckpt.string() + " was trained on a different coreset");
    out.model = std::move(ck.model);
    out.meta = std::move(ck.meta);
    first_epoch = out.meta.epoch;
  } else {
    auto enc = encoding::TesseractEncoder<float>::from_fbb(man.fbb.sizes(), man.key_times, cfg.fold, cfg.embedding_size);
    out.model = nn::init_model(std::move(enc), cfg.mlp, cfg.seed);
    out.meta.dataset_hash = hash;
    out.meta.fbb = man.fbb;
    const auto rel = fs::relative(man.dir, cfg.output_dir);
    for (const auto& f : man.occupancy_files) out.meta.occupancy_files.push_back((rel / f).lexically_normal().generic_string());
    out.meta.extra = {{"volume_dims", man.doc.at("dataset").at("dims")},
                      {"key_frames", man.doc.at("key_frames")},
                      {"feature", man.doc.at("feature")},
                      {"seed", cfg.seed}};
  }

  auto tc = cfg.train;
  tc.seed = cfg.seed + static_cast<std::uint64_t>(first_epoch);
  out.result = nn::train(
      out.model, data, tc,
      [&](nn::EpochReport& rep) {
        if (cfg.psnr_every > 0 && rep.epoch % cfg.psnr_every == 0) rep.psnr = nn::coreset_psnr(out.model, data);
        log << "epoch " << rep.epoch << " loss " << rep.loss;
        if (rep.psnr) log << " psnr " << *rep.psnr;
        log << "\n";
        return true;
      },
      first_epoch);

  std::vector<std::optional<double>> psnr(out.meta.loss_history.size());
  for (const auto& r : out.result.trace) {
    out.meta.loss_history.push_back(r.loss);
    psnr.push_back(r.psnr);
  }
  out.meta.epoch = first_epoch + out.result.epochs_run;
  nn::save_checkpoint(out.model, out.meta, ckpt);

  // Earlier epochs' PSNR is not kept across resumes; their cells stay empty.
  std::ostringstream csv;
  csv.precision(17);
  csv << "epoch,loss,psnr\n";
  for (std::size_t e = 0; e < out.meta.loss_history.size(); ++e) {
    csv << e + 1 << ',' << out.meta.loss_history[e] << ',';
    if (psnr[e]) csv << *psnr[e];
    csv << '\n';
  }
  write_text_file(cfg.output_dir / kLossName, csv.str());
  log << "checkpoint: " << ckpt.string() << " (epoch " << out.meta.epoch << ")\n";
  return out;
}

// ----------------------------------------------------------------- render

/// A trained model with everything the renderer needs.
struct TrainedModel {
  nn::FloatModel model;
  nn::CheckpointMeta meta;
  coreset::FeatureBoundingBox fbb;
  std::vector<coreset::OccupancyGrid> occupancy;
  Dims3 volume_dims;

  double t_min() const { return model.encoder.key_times().front(); }
  double t_max() const { return model.encoder.key_times().back(); }
};

inline TrainedModel load_trained(const fs::path& ckpt) {
  require_file(ckpt, "checkpoint");
  auto ck = nn::load_checkpoint<float>(ckpt);
  TrainedModel m;
  m.model = std::move(ck.model);
  m.meta = std::move(ck.meta);
  if (!m.meta.fbb) throw FormatError("checkpoint " + ckpt.string() + " has no feature bounding box");
  m.fbb = *m.meta.fbb;
  m.volume_dims = m.fbb.volume_dims;
  for (const auto& f : m.meta.occupancy_files) {
    const auto p = ckpt.parent_path() / f;
    require_file(p, "occupancy grid");
    m.occupancy.push_back(coreset::load_occupancy(p));
  }
  if (m.occupancy.size() != m.model.encoder.key_times().size())
    throw FormatError("checkpoint " + ckpt.string() + " lists " + std::to_string(m.occupancy.size()) +
                      " occupancy grids for " + std::to_string(m.model.encoder.key_times().size()) + " key frames");
  return m;
}

/// Renders one frame. Inside the key range the occupancy is the key grid or
/// the blend of the bracketing grids; outside it (extrapolation) the nearest
/// key's model slice and grid are used.
inline render::RenderResult render_trained(const TrainedModel& m, double t, const render::Camera& cam,
                                           const render::TransferFunction& tf, const render::ArmConfig& arm,
                                           bool extrapolate) {
  if (!(t >= m.t_min() && t <= m.t_max())) {
    if (!extrapolate)
      throw ArgumentError("time " + std::to_string(t) + " outside the trained key range [" + std::to_string(m.t_min()) +
                          ", " + std::to_string(m.t_max()) + "]; pass --extrapolate to clamp to the nearest key");
    t = std::clamp(t, m.t_min(), m.t_max());
  }
  const render::ModelField<nn::FloatModel> field(m.model, m.fbb);
  return render::render_supersampled_time(field, t, std::span<const coreset::OccupancyGrid>(m.occupancy), cam, tf, arm);
}

/// "a:b:step" -> a, a + step, ... up to b inclusive.
inline std::vector<double> parse_time_sweep(const std::string& spec) {
  double v[3];
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const auto colon = spec.find(':', start);
    if ((i < 2) == (colon == std::string::npos)) throw ArgumentError("--times expects a:b:step, got '" + spec + "'");
    const auto part = spec.substr(start, colon == std::string::npos ? std::string::npos : colon - start);
    try {
      std::size_t used = 0;
      v[i] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ArgumentError("--times: '" + part + "' is not a number");
    }
    start = colon + 1;
  }
  if (!(v[2] > 0.0) || !std::isfinite(v[0]) || !std::isfinite(v[1])) throw ArgumentError("--times step must be positive");
  if (v[1] < v[0]) throw ArgumentError("--times end must not precede start");
  const auto n = static_cast<std::int64_t>(std::floor((v[1] - v[0]) / v[2] + 1e-9)) + 1;
  if (n > 100000) throw ArgumentError("--times produces too many frames");
  std::vector<double> out;
  for (std::int64_t i = 0; i < n; ++i) out.push_back(std::min(v[0] + static_cast<double>(i) * v[2], v[1]));
  return out;
}

/// render.png -> render_007.png with at least three digits.
inline fs::path sweep_path(const fs::path& base, std::size_t index, std::size_t count) {
  const int digits = std::max(3, static_cast<int>(std::to_string(count > 0 ? count - 1 : 0).size()));
  std::ostringstream name;
  name << base.stem().string() << '_' << std::setw(digits) << std::setfill('0') << index << base.extension().string();
  return base.parent_path() / name.str();
}

inline std::vector<fs::path> cmd_render(const JobConfig& cfg, std::ostream& log) {
  const auto& rc = cfg.render;
  const auto m = load_trained(cfg.checkpoint_path());
  const auto& tf = rc.tf ? *rc.tf : render::builtin_transfer_function(rc.tf_id);
  const fs::path base = rc.out.empty() ? cfg.output_dir / "render.png" : rc.out;
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  std::vector<double> times = rc.times.empty() ? std::vector<double>{rc.t} : parse_time_sweep(rc.times);
  // Validate every time before writing anything.
  if (!rc.extrapolate)
    for (double t : times)
      if (!(t >= m.t_min() && t <= m.t_max())) render_trained(m, t, rc.camera, tf, rc.arm, false);
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto r = render_trained(m, times[i], rc.camera, tf, rc.arm, rc.extrapolate);
    const auto path = rc.times.empty() ? base : sweep_path(base, i, times.size());
    png::write_file(r.image, path);
    log << path.string() << " t=" << times[i] << " iterations=" << r.stats.iterations << " samples=" << r.stats.samples
        << " ms=" << 1e3 * r.stats.seconds << "\n";
    written.push_back(path);
  }
  return written;
}

// ------------------------------------------------------------------ bench

struct BenchOutcome {
  std::vector<std::pair<std::string, bench::RaceReport>> races;
  std::vector<bench::LatencyRow> latency;
};

inline BenchOutcome cmd_bench(const JobConfig& cfg, std::ostream& log) {
  const auto& bc = cfg.bench;
  const fs::path out = bc.out.empty() ? cfg.output_dir / "bench" : bc.out;
  fs::create_directories(out);
  std::vector<std::pair<std::string, bench::Scene>> scenes;
  if (bc.datasets.empty()) {
    auto s = bench::moving_gaussian_scene();
    scenes.emplace_back(s.name, std::move(s));
  } else {
    for (const auto& d : bc.datasets) {
      bench::Scene s;
      s.name = d.name;
      s.volume = load_dataset(d);
      s.keys = choose_key_frames(s.volume, cfg.keys);
      s.feature = cfg.feature;
      scenes.emplace_back(d.name, std::move(s));
    }
  }

  BenchOutcome result;
  for (const auto& [name, scene] : scenes) {
    const auto cs = coreset::build_coreset(scene.volume, scene.keys, scene.feature);
    bench::RaceConfig rc;
    rc.train.learning_rate = cfg.train.learning_rate;
    rc.mlp = cfg.mlp;
    rc.fold = cfg.fold;
    rc.embedding_size = cfg.embedding_size;
    rc.seeds = bc.seeds;
    rc.first_seed = cfg.seed + 1;
    rc.target_psnr = bc.target_psnr;
    log << "[" << name << "] coreset " << cs.coreset.size() << " samples\n";
    auto report = bench::run_race(cs, scene.volume.meta.dims, rc, [&](const std::string& method, const bench::RaceRun& run) {
      log << "[" << name << "] " << method << " seed " << run.seed << ": "
          << (run.epochs_to_target < 0 ? std::string("not reached") : std::to_string(run.epochs_to_target) + " epochs")
          << "\n";
    });
    bench::write_race_csv(report, out / ("race_" + name + ".csv"));
    bench::write_summary_csv(report, bc.target_psnr, out / ("summary_" + name + ".csv"));
    for (const auto& m : report.methods)
      log << "[" << name << "] " << m.method << ": params " << m.total_params << ", collisions " << m.stats.collision_count
          << ", median epochs to " << bc.target_psnr << " dB " << m.median_epochs() << "\n";

    const render::ModelField<nn::FloatModel> field(report.fhash_model, cs.fbb);
    bench::LatencyConfig lc;
    lc.repeats = bc.repeats;
    lc.width = lc.height = bc.render_size;
    lc.t = cs.key_times.front();
    lc.base.threads = 0;
    auto row = bench::time_renders(name, field, cs.occupancy.front(), lc);
    log << "[" << name << "] render median ms: arm " << row.arm_median() << ", fixed " << row.fixed_median() << "\n";
    result.latency.push_back(std::move(row));
    result.races.emplace_back(name, std::move(report));
  }
  bench::write_latency_csv(result.latency, out / "latency.csv");
  log << "reports: " << out.string() << "\n";
  return result;
}

}  // namespace tvinr::pipeline
