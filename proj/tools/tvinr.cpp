// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tvinr/pipeline.hpp"
#include "tvinr/service.hpp"

namespace {

using nlohmann::json;
namespace pl = tvinr::pipeline;

// Flag values are written into the config document before validation, so
// they share the config's field-level checks.
struct Overrides {
  std::vector<std::pair<std::string, json>> values;
  std::vector<std::string> assignments;

  template <class T>
  void add(const std::string& key, const std::optional<T>& v) {
    if (v) values.emplace_back(key, json(*v));
  }
};

void apply_overrides(json& doc, const Overrides& o) {
  for (const auto& [k, v] : o.values) tvinr::apply_override(doc, k + "=" + v.dump());
  for (const auto& a : o.assignments) tvinr::apply_override(doc, a);
}

void report_error(const std::string& kind, const std::string& message, const json& extra = json::object()) {
  json j{{"error", kind}, {"message", message}};
  j.update(extra);
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tvinr: feature-based hash encoding for time-varying volumes"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  app.add_option("--seed", seed, "Seed for initialization and shuffling");
  app.add_flag("--deterministic", deterministic, "Fixed-order reductions (bit-identical reruns)");

  std::string config_path;
  Overrides ov;
  std::optional<std::string> out_dir;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Job configuration JSON")->check(CLI::ExistingFile);
    sub->add_option("--set", ov.assignments, "Override a config field, e.g. --set train.max_epochs=10");
    sub->add_option("--out-dir", out_dir, "Output directory (config output_dir)");
  };

  auto* extract = app.add_subcommand("extract", "Select the feature coreset and write occupancy grids + manifest");
  common(extract);
  std::optional<std::string> volume, meta, synthetic;
  std::optional<std::int64_t> key_count;
  extract->add_option("--volume", volume, "Raw little-endian f32 volume");
  extract->add_option("--meta", meta, "Volume metadata JSON (default: volume path with .json)");
  extract->add_option("--synthetic", synthetic, "Synthetic dataset name (moving_gaussian)");
  extract->add_option("--key-frames", key_count, "Number of key frames");

  auto* train = app.add_subcommand("train", "Train the INR on an extracted coreset");
  common(train);
  bool resume = false;
  std::optional<int> epochs;
  std::optional<std::int64_t> batch;
  std::optional<double> lr;
  std::optional<std::string> manifest;
  train->add_flag("--resume", resume, "Continue from the checkpoint in the output directory");
  train->add_option("--epochs", epochs, "Epochs to run");
  train->add_option("--batch-size", batch, "Mini-batch size");
  train->add_option("--lr", lr, "Adam learning rate");
  train->add_option("--manifest", manifest, "Manifest written by extract");

  auto* render = app.add_subcommand("render", "Render one frame or a time sweep to PNG");
  common(render);
  std::optional<std::string> checkpoint, times, tf, out, camera_json;
  std::optional<double> t;
  std::optional<int> width, height;
  bool extrapolate = false;
  render->add_option("--checkpoint", checkpoint, "Checkpoint (default <out-dir>/model.ckpt)");
  render->add_option("--t", t, "Time in [-1, 1]");
  render->add_option("--times", times, "Time sweep a:b:step");
  render->add_option("--tf", tf, "Transfer function id");
  render->add_option("--width", width, "Image width");
  render->add_option("--height", height, "Image height");
  render->add_option("--out", out, "Output PNG path");
  render->add_option("--camera", camera_json, "Camera JSON {eye, target, up, fov}");
  render->add_flag("--extrapolate", extrapolate, "Clamp times outside the key range instead of failing");

  auto* bench = app.add_subcommand("bench", "Convergence race, encoding stats and ARM render timing");
  common(bench);
  std::optional<int> seeds, repeats;
  std::optional<std::string> bench_out;
  bench->add_option("--seeds", seeds, "Seeds per method");
  bench->add_option("--repeats", repeats, "Render timing repeats");
  bench->add_option("--out", bench_out, "Report directory (default <out-dir>/bench)");

  auto* serve = app.add_subcommand("serve", "HTTP render service");
  common(serve);
  std::optional<std::string> host, serve_ckpt;
  std::optional<int> port, threads;
  std::optional<std::int64_t> max_pixels;
  serve->add_option("--checkpoint", serve_ckpt, "Checkpoint (default <out-dir>/model.ckpt)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--max-pixels", max_pixels, "Largest accepted width*height");
  serve->add_option("--threads", threads, "Concurrent request workers");

  CLI11_PARSE(app, argc, argv);

  try {
    json doc = config_path.empty() ? json::object() : pl::read_json_file(config_path);
    ov.add("output_dir", out_dir);
    if (seed) doc["seed"] = *seed;
    if (deterministic) doc["deterministic"] = true;
    ov.add("dataset.volume", volume);
    ov.add("dataset.meta", meta);
    ov.add("dataset.synthetic", synthetic);
    ov.add("key_frames.count", key_count);
    ov.add("train.max_epochs", epochs);
    ov.add("train.batch_size", batch);
    ov.add("train.learning_rate", lr);
    ov.add("manifest", manifest);
    ov.add("render.checkpoint", checkpoint);
    ov.add("render.t", t);
    ov.add("render.times", times);
    ov.add("render.transfer_function", tf);
    ov.add("render.width", width);
    ov.add("render.height", height);
    ov.add("render.out", out);
    if (extrapolate) ov.values.emplace_back("render.extrapolate", true);
    if (camera_json) {
      const json cam = json::parse(*camera_json, nullptr, false);
      if (cam.is_discarded()) throw tvinr::ArgumentError("--camera is not valid JSON");
      ov.values.emplace_back("render.camera", cam);
    }
    ov.add("bench.seeds", seeds);
    ov.add("bench.repeats", repeats);
    ov.add("bench.out", bench_out);
    ov.add("serve.checkpoint", serve_ckpt);
    ov.add("serve.host", host);
    ov.add("serve.port", port);
    ov.add("serve.max_pixels", max_pixels);
    ov.add("serve.threads", threads);
    apply_overrides(doc, ov);
    const auto cfg = pl::parse_job_config(doc);

    if (*extract) {
      if (cfg.dataset.volume.empty() && cfg.dataset.synthetic.empty())
        throw tvinr::FieldError("dataset", "required: --volume/--meta or --synthetic");
      pl::cmd_extract(cfg, std::cout);
    } else if (*train) {
      pl::cmd_train(cfg, resume, std::cout);
    } else if (*render) {
      pl::cmd_render(cfg, std::cout);
    } else if (*bench) {
      pl::cmd_bench(cfg, std::cout);
    } else if (*serve) {
      return tvinr::service::serve(cfg, std::cout);
    }
    return 0;
  } catch (const tvinr::DivergenceError& e) {
    report_error(e.kind(), e.what(), {{"epoch", e.epoch()}});
  } catch (const tvinr::FieldError& e) {
    report_error(e.kind(), e.what(), {{"field", e.field()}});
  } catch (const tvinr::Error& e) {
    report_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    report_error("internal", e.what());
  }
  return 1;
}
