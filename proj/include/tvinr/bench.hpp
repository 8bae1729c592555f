// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "tvinr/baseline.hpp"
#include "tvinr/checkpoint.hpp"
#include "tvinr/encoding_stats.hpp"
#include "tvinr/feature_coreset.hpp"
#include "tvinr/renderer.hpp"
#include "tvinr/train.hpp"
#include "tvinr/volume_io.hpp"

namespace tvinr::bench {

struct Scene {
  std::string name;
  io::Volume4D volume;
  io::KeyFrameSet keys;
  coreset::FeatureSpec feature;
};

/// Gaussian blob drifting across a 32^3 box over 8 frames, 4 key frames,
/// segmentation at 0.5.
inline Scene moving_gaussian_scene() {
  Scene s;
  s.name = "moving_gaussian";
  s.volume = io::synth_moving_gaussian({32, 32, 32}, 8, {{-0.5, -0.1, 0.0}, {0.5, 0.2, 0.0}, 0.35});
  s.keys = io::uniform_key_frames(8, 4);
  s.feature = coreset::FeatureSpec::segmentation(0.5);
  return s;
}

/// Training setup shared by every method in the benchmark.
inline nn::TrainConfig benchmark_train_config() {
  nn::TrainConfig cfg;
  cfg.batch_size = 1024;
  cfg.max_epochs = 60;
  return cfg;
}

struct RaceConfig {
  nn::TrainConfig train = benchmark_train_config();
  nn::MlpConfig mlp{};
  std::int64_t fold = 2;
  std::int64_t embedding_size = 2;
  double target_psnr = 30.0;
  int seeds = 5;
  std::uint64_t first_seed = 1;
  double param_tolerance = 0.10;
  bool stop_at_target = true;
};

using BaselineModel = nn::InrModel<encoding::BaselineSet<float>>;

struct MatchedBaselines {
  encoding::BaselineSet<float> dense_single, dense_multi, spatial_hash;
};

namespace detail {

inline std::vector<Dims3> halving_pyramid(Dims3 top, std::size_t levels) {
  std::vector<Dims3> out;
  auto half = [](std::int64_t r) { return std::max<std::int64_t>(2, (r + 1) / 2); };
  for (; out.size() < levels; top = {half(top.x), half(top.y), half(top.z)}) out.push_back(top);
  return out;
}

inline std::int64_t total_count(const std::vector<Dims3>& levels) {
  std::int64_t n = 0;
  for (const auto& d : levels) n += d.count();
  return n;
}

}  // namespace detail

/// Baselines whose per-frame table entries total about `entries_per_frame`:
/// a single dense grid, a halving dense pyramid and a spatial hash with
/// `levels` levels growing geometrically from 4 to `finest`.
inline MatchedBaselines match_baselines(std::int64_t entries_per_frame, std::size_t levels, std::int64_t finest,
                                        std::int64_t embedding_size, const std::vector<double>& key_times) {
  using encoding::BaselineEncoder;
  using encoding::BaselineKind;
  if (entries_per_frame < 8 || levels < 1) throw ArgumentError("baseline budget too small");

  // Dense grids: axes at r or r + 1, nearest entry count.
  auto nearest = [&](auto&& entries) {
    Dims3 best_dims{2, 2, 2};
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (std::int64_t r = 2; r * r * r <= 2 * entries_per_frame; ++r)
      for (int up = 0; up <= 3; ++up) {
        const Dims3 d{r + (up > 2), r + (up > 1), r + (up > 0)};
        const auto diff = std::abs(entries(d) - entries_per_frame);
        if (diff < best) best = diff, best_dims = d;
      }
    return best_dims;
  };
  const Dims3 single = nearest([](const Dims3& d) { return d.count(); });
  const auto pyramid =
      detail::halving_pyramid(nearest([&](const Dims3& d) { return detail::total_count(detail::halving_pyramid(d, levels)); }), levels);

  std::vector<Dims3> hash_res;
  const double lo = 4.0, hi = static_cast<double>(std::max<std::int64_t>(finest, 4));
  for (std::size_t l = 0; l < levels; ++l) {
    const double g = levels == 1 ? hi : lo * std::pow(hi / lo, static_cast<double>(l) / static_cast<double>(levels - 1));
    const auto r = static_cast<std::int64_t>(std::floor(g + 1e-9));
    hash_res.push_back({r, r, r});
  }
  const std::int64_t table = std::max<std::int64_t>(1, entries_per_frame / static_cast<std::int64_t>(levels));

  return {encoding::BaselineSet<float>(BaselineEncoder<float>(BaselineKind::dense_single, {single}, embedding_size), key_times),
          encoding::BaselineSet<float>(BaselineEncoder<float>(BaselineKind::dense_multi, pyramid, embedding_size), key_times),
          encoding::BaselineSet<float>(
              BaselineEncoder<float>(BaselineKind::mhe_spatial_hash, hash_res, embedding_size, table), key_times)};
}

/// Coreset samples moved from feature-box coordinates to volume coordinates,
/// the domain the baseline encoders cover.
inline coreset::Coreset to_volume_coords(const coreset::Coreset& c, const coreset::FeatureBoundingBox& fbb) {
  coreset::Coreset out = c;
  for (auto& s : out.samples) {
    const Vec3d p = coreset::from_fbb_coords({s.coords[1], s.coords[2], s.coords[3]}, fbb);
    s.coords = {s.coords[0], static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z)};
  }
  return out;
}

struct RaceRun {
  std::uint64_t seed = 0;
  std::vector<double> psnr;       // after each epoch
  int epochs_to_target = -1;      // -1: not reached
  double seconds = 0.0;
  double seconds_to_target = -1.0;
};

struct MethodResult {
  std::string method;
  std::int64_t encoder_params = 0;
  std::int64_t total_params = 0;
  encoding::EncodingStats stats;
  std::vector<RaceRun> runs;

  /// Median epochs to target; runs that never reach it count as +inf.
  double median_epochs() const {
    std::vector<double> e;
    for (const auto& r : runs) e.push_back(r.epochs_to_target < 0 ? std::numeric_limits<double>::infinity() : r.epochs_to_target);
    if (e.empty()) return std::numeric_limits<double>::infinity();
    std::sort(e.begin(), e.end());
    const auto n = e.size();
    return n % 2 ? e[n / 2] : 0.5 * (e[n / 2 - 1] + e[n / 2]);
  }
};

struct RaceReport {
  std::vector<MethodResult> methods;  // F-Hash first
  nn::FloatModel fhash_model;         // first seed, as trained in the race

  const MethodResult& method(const std::string& name) const {
    for (const auto& m : methods)
      if (m.method == name) return m;
    throw ArgumentError("no method '" + name + "' in report");
  }
  /// F-Hash median epochs <= every baseline median.
  bool fhash_not_slower() const {
    const double f = methods.front().median_epochs();
    if (!std::isfinite(f)) return false;
    for (std::size_t i = 1; i < methods.size(); ++i)
      if (f > methods[i].median_epochs()) return false;
    return true;
  }
};

using RaceProgress = std::function<void(const std::string& method, const RaceRun& run)>;

template <class Model>
RaceRun race_one(Model& model, const coreset::Coreset& data, const RaceConfig& cfg, std::uint64_t seed) {
  RaceRun run;
  run.seed = seed;
  auto tc = cfg.train;
  tc.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  double eval_seconds = 0.0;
  nn::train(model, data, tc, [&](nn::EpochReport& rep) {
    const auto e0 = std::chrono::steady_clock::now();
    const double p = nn::coreset_psnr(model, data);
    eval_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - e0).count();
    rep.psnr = p;
    run.psnr.push_back(p);
    if (run.epochs_to_target < 0 && p >= cfg.target_psnr) {
      run.epochs_to_target = rep.epoch;
      run.seconds_to_target = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() - eval_seconds;
      if (cfg.stop_at_target) return false;
    }
    return true;
  });
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() - eval_seconds;
  return run;
}

/// Convergence race: F-Hash against budget-matched baselines, all trained on
/// the same coreset samples with the same optimizer settings and seeds.
inline RaceReport run_race(const coreset::CoresetResult& cs, const Dims3& volume_dims, const RaceConfig& cfg,
                           const RaceProgress& progress = {}) {
  if (cfg.seeds < 1) throw ArgumentError("race needs at least one seed");
  const auto fh = encoding::TesseractEncoder<float>::from_fbb(cs.fbb.sizes(), cs.key_times, cfg.fold, cfg.embedding_size);
  const auto n_keys = static_cast<std::int64_t>(cs.key_times.size());
  const auto per_frame = (static_cast<std::int64_t>(fh.params().size()) / cfg.embedding_size + n_keys - 1) / n_keys;
  const auto finest = std::max({volume_dims.x, volume_dims.y, volume_dims.z});
  auto base = match_baselines(per_frame, fh.num_levels(), finest, cfg.embedding_size, cs.key_times);
  const auto global = to_volume_coords(cs.coreset, cs.fbb);

  RaceReport report;
  auto add = [&](const std::string& name, const auto& encoder) {
    MethodResult m;
    m.method = name;
    m.encoder_params = static_cast<std::int64_t>(encoder.params().size());
    m.total_params = static_cast<std::int64_t>(nn::init_model(encoder, cfg.mlp, 0).param_count());
    m.stats = encoding::encoding_stats(encoder);
    report.methods.push_back(std::move(m));
  };
  add("fhash", fh);
  add(encoding::to_string(encoding::BaselineKind::dense_single), base.dense_single);
  add(encoding::to_string(encoding::BaselineKind::dense_multi), base.dense_multi);
  add(encoding::to_string(encoding::BaselineKind::mhe_spatial_hash), base.spatial_hash);

  const double ref = static_cast<double>(report.methods.front().total_params);
  for (const auto& m : report.methods)
    if (std::abs(static_cast<double>(m.total_params) - ref) > cfg.param_tolerance * ref)
      throw ArgumentError("parameter budget of " + m.method + " (" + std::to_string(m.total_params) +
                          ") is not within tolerance of F-Hash (" + std::to_string(report.methods.front().total_params) + ")");

  for (int s = 0; s < cfg.seeds; ++s) {
    const std::uint64_t seed = cfg.first_seed + static_cast<std::uint64_t>(s);
    auto record = [&](std::size_t i, RaceRun run) {
      if (progress) progress(report.methods[i].method, run);
      report.methods[i].runs.push_back(std::move(run));
    };
    auto fm = nn::init_model(fh, cfg.mlp, seed);
    record(0, race_one(fm, cs.coreset, cfg, seed));
    if (s == 0) report.fhash_model = std::move(fm);
    const encoding::BaselineSet<float>* sets[3] = {&base.dense_single, &base.dense_multi, &base.spatial_hash};
    for (std::size_t b = 0; b < 3; ++b) {
      auto bm = nn::init_model(*sets[b], cfg.mlp, seed);
      record(b + 1, race_one(bm, global, cfg, seed));
    }
  }
  return report;
}

struct LatencyConfig {
  int repeats = 5;
  int width = 128, height = 128;
  double t = 0.0;
  std::string tf = "hot";
  render::Camera camera{};
  render::ArmConfig base{};
};

struct LatencyRow {
  std::string dataset;
  std::vector<double> arm_ms, fixed_ms;
  std::int64_t arm_iterations = 0, fixed_iterations = 0;
  std::int64_t arm_samples = 0, fixed_samples = 0;
  bool images_identical = false;

  static double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n == 0 ? 0.0 : (n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
  }
  double arm_median() const { return median(arm_ms); }
  double fixed_median() const { return median(fixed_ms); }
};

/// Sample streaming with and without ARM, interleaved, after one warm-up each.
template <render::ScalarField Field>
LatencyRow time_renders(const std::string& dataset, const Field& field, const coreset::OccupancyGrid& occ,
                        const LatencyConfig& cfg) {
  if (cfg.repeats < 1) throw ArgumentError("latency needs at least one repeat");
  auto cam = cfg.camera;
  cam.width = cfg.width;
  cam.height = cfg.height;
  const auto& tf = render::builtin_transfer_function(cfg.tf);
  auto arm = cfg.base;
  arm.adaptive = true;
  auto fixed = cfg.base;
  fixed.adaptive = false;
  fixed.fixed_pace = 1;

  LatencyRow row;
  row.dataset = dataset;
  const auto a0 = render::render(field, cfg.t, cam, tf, arm, &occ);
  const auto f0 = render::render(field, cfg.t, cam, tf, fixed, &occ);
  row.images_identical = a0.image == f0.image;
  row.arm_iterations = a0.stats.iterations;
  row.fixed_iterations = f0.stats.iterations;
  row.arm_samples = a0.stats.samples;
  row.fixed_samples = f0.stats.samples;
  for (int r = 0; r < cfg.repeats; ++r) {
    row.arm_ms.push_back(1e3 * render::render(field, cfg.t, cam, tf, arm, &occ).stats.seconds);
    row.fixed_ms.push_back(1e3 * render::render(field, cfg.t, cam, tf, fixed, &occ).stats.seconds);
  }
  return row;
}

inline std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.precision(10);
  return out;
}

inline void write_race_csv(const RaceReport& r, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "method,seed,epoch,psnr\n";
  for (const auto& m : r.methods)
    for (const auto& run : m.runs)
      for (std::size_t e = 0; e < run.psnr.size(); ++e) out << m.method << ',' << run.seed << ',' << e + 1 << ',' << run.psnr[e] << '\n';
}

inline void write_summary_csv(const RaceReport& r, double target, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "method,encoder_params,total_params,collision_count,bucket_utilization,target_psnr,median_epochs_to_target,"
         "median_seconds_to_target\n";
  for (const auto& m : r.methods) {
    std::vector<double> secs;
    for (const auto& run : m.runs)
      secs.push_back(run.seconds_to_target < 0 ? std::numeric_limits<double>::infinity() : run.seconds_to_target);
    const double me = m.median_epochs();
    const double ms = LatencyRow::median(secs);
    out << m.method << ',' << m.encoder_params << ',' << m.total_params << ',' << m.stats.collision_count << ','
        << m.stats.bucket_utilization << ',' << target << ',' << (std::isfinite(me) ? std::to_string(me) : "NR") << ','
        << (std::isfinite(ms) ? std::to_string(ms) : "NR") << '\n';
  }
}

inline void write_latency_csv(const std::vector<LatencyRow>& rows, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "dataset,repeats,arm_ms_median,fixed_ms_median,arm_iterations,fixed_iterations,arm_samples,fixed_samples,"
         "images_identical\n";
  for (const auto& r : rows)
    out << r.dataset << ',' << r.arm_ms.size() << ',' << r.arm_median() << ',' << r.fixed_median() << ','
        << r.arm_iterations << ',' << r.fixed_iterations << ',' << r.arm_samples << ',' << r.fixed_samples << ','
        << (r.images_identical ? "true" : "false") << '\n';
}

}  // namespace tvinr::bench
