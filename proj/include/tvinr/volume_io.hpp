// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvinr/common.hpp"

namespace tvinr::io {

struct VolumeMeta {
  Dims3 dims;
  std::int64_t num_frames = 0;
  double value_min = 0.0;
  double value_max = 0.0;
  std::string dataset_name;

  void validate() const {
    if (dims.x < 2 || dims.y < 2 || dims.z < 2)
      throw ArgumentError("volume dims must be >= 2 on every axis");
    if (num_frames < 1) throw ArgumentError("volume must have at least one frame");
    if (!(value_min <= value_max)) throw ArgumentError("value_min must not exceed value_max");
  }
  std::int64_t frame_size() const { return dims.count(); }
};

/// Time-varying scalar field normalized to [0, 1]. Frames are stored
/// back to back, each X-fastest then Y then Z.
struct Volume4D {
  VolumeMeta meta;
  std::vector<float> values;
  /// Original samples, kept by load_volume so write_volume is lossless.
  std::vector<float> raw;

  std::span<const float> frame(std::int64_t t) const {
    const auto n = static_cast<std::size_t>(meta.frame_size());
    return std::span<const float>(values).subspan(static_cast<std::size_t>(t) * n, n);
  }
  std::span<float> frame(std::int64_t t) {
    const auto n = static_cast<std::size_t>(meta.frame_size());
    return std::span<float>(values).subspan(static_cast<std::size_t>(t) * n, n);
  }
  float at(std::int64_t t, std::int64_t x, std::int64_t y, std::int64_t z) const {
    return values[static_cast<std::size_t>(t * meta.frame_size() + meta.dims.linear(x, y, z))];
  }
};

struct KeyFrameSet {
  std::vector<std::int64_t> indices;

  std::size_t size() const { return indices.size(); }

  void validate(std::int64_t num_frames) const {
    if (indices.size() < 2) throw ArgumentError("at least two key frames are required");
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] < 0 || indices[i] >= num_frames)
        throw ArgumentError("key frame index " + std::to_string(indices[i]) + " out of range");
      if (i > 0 && indices[i] <= indices[i - 1])
        throw ArgumentError("key frame indices must be strictly increasing");
    }
  }

  /// Normalized time of the k-th key frame: -1 + 2k/(n-1).
  double time_of(std::size_t k) const { return vertex_to_unit(static_cast<std::int64_t>(k), static_cast<std::int64_t>(size())); }

  std::vector<double> times() const {
    std::vector<double> out(size());
    for (std::size_t k = 0; k < size(); ++k) out[k] = time_of(k);
    return out;
  }
};

namespace detail {

inline float load_le_f32(const unsigned char* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline void store_le_f32(float v, unsigned char* p) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  p[0] = static_cast<unsigned char>(bits & 0xffu);
  p[1] = static_cast<unsigned char>((bits >> 8) & 0xffu);
  p[2] = static_cast<unsigned char>((bits >> 16) & 0xffu);
  p[3] = static_cast<unsigned char>((bits >> 24) & 0xffu);
}

}  // namespace detail

/// Global min-max normalization over every frame. A degenerate range maps to 0.
inline void normalize_in_place(Volume4D& vol) {
  if (vol.values.empty()) return;
  const auto [lo, hi] = std::minmax_element(vol.values.begin(), vol.values.end());
  const double vmin = *lo, vmax = *hi;
  vol.meta.value_min = vmin;
  vol.meta.value_max = vmax;
  const double range = vmax - vmin;
  for (auto& v : vol.values)
    v = range > 0.0 ? static_cast<float>((static_cast<double>(v) - vmin) / range) : 0.0f;
}

inline VolumeMeta read_meta(const std::filesystem::path& meta_path) {
  std::ifstream in(meta_path);
  if (!in) throw FormatError("cannot open metadata file " + meta_path.string());
  nlohmann::json j;
  try {
    in >> j;
    VolumeMeta m;
    const auto& d = j.at("dims");
    if (!d.is_array() || d.size() != 3) throw FormatError("metadata 'dims' must be [x, y, z]");
    m.dims = {d[0].get<std::int64_t>(), d[1].get<std::int64_t>(), d[2].get<std::int64_t>()};
    m.num_frames = j.at("frames").get<std::int64_t>();
    if (j.value("dtype", std::string("f32")) != "f32")
      throw FormatError("unsupported dtype in " + meta_path.string());
    m.value_min = j.value("value_min", 0.0);
    m.value_max = j.value("value_max", 0.0);
    m.dataset_name = j.value("name", meta_path.stem().string());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed metadata " + meta_path.string() + ": " + e.what());
  }
}

inline Volume4D load_volume(const std::filesystem::path& path, const std::filesystem::path& meta_path) {
  VolumeMeta meta = read_meta(meta_path);
  if (meta.dims.x < 2 || meta.dims.y < 2 || meta.dims.z < 2 || meta.num_frames < 1)
    throw FormatError("metadata dims/frames out of range in " + meta_path.string());

  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open volume file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto expected = static_cast<std::size_t>(meta.dims.count() * meta.num_frames);
  if (bytes.size() != expected * 4)
    throw FormatError(path.string() + ": expected " + std::to_string(expected * 4) + " bytes, found " +
                      std::to_string(bytes.size()));

  Volume4D vol;
  vol.meta = meta;
  vol.raw.resize(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    const float v = detail::load_le_f32(bytes.data() + 4 * i);
    if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite value at element " + std::to_string(i));
    vol.raw[i] = v;
  }
  vol.values = vol.raw;
  normalize_in_place(vol);
  return vol;
}

inline nlohmann::json meta_to_json(const VolumeMeta& m) {
  return {{"dims", {m.dims.x, m.dims.y, m.dims.z}},
          {"frames", m.num_frames},
          {"dtype", "f32"},
          {"value_min", m.value_min},
          {"value_max", m.value_max},
          {"name", m.dataset_name}};
}

/// Writes `<path>` (raw f32 LE) and `<meta_path>` (JSON sidecar). Raw samples are
/// written when present, otherwise the normalized values.
inline void write_volume(const Volume4D& vol, const std::filesystem::path& path,
                         const std::filesystem::path& meta_path) {
  const auto& src = vol.raw.empty() ? vol.values : vol.raw;
  std::vector<unsigned char> bytes(src.size() * 4);
  for (std::size_t i = 0; i < src.size(); ++i) detail::store_le_f32(src[i], bytes.data() + 4 * i);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  std::ofstream mo(meta_path);
  if (!mo) throw FormatError("cannot write " + meta_path.string());
  mo << meta_to_json(vol.meta).dump(2) << "\n";
}

inline Vec3d normalize_coords(Index3 i, const Dims3& dims) {
  if (i.x < 0 || i.x >= dims.x || i.y < 0 || i.y >= dims.y || i.z < 0 || i.z >= dims.z)
    throw BoundsError("voxel index out of range");
  return {vertex_to_unit(i.x, dims.x), vertex_to_unit(i.y, dims.y), vertex_to_unit(i.z, dims.z)};
}

inline Vec3d normalize_coords(Index3 i, const VolumeMeta& meta) { return normalize_coords(i, meta.dims); }

/// Farthest-point key frame selection on L2 frame distance. The first and
/// last frames are always kept; ties go to the lower index.
inline KeyFrameSet select_key_frames(const Volume4D& vol, std::int64_t budget) {
  const std::int64_t T = vol.meta.num_frames;
  if (budget < 2 || budget > T)
    throw ArgumentError("key frame budget " + std::to_string(budget) + " must lie in [2, " + std::to_string(T) + "]");

  auto dist2 = [&](std::int64_t a, std::int64_t b) {
    const auto fa = vol.frame(a), fb = vol.frame(b);
    double s = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
      const double d = static_cast<double>(fa[i]) - fb[i];
      s += d * d;
    }
    return s;
  };

  std::vector<bool> chosen(static_cast<std::size_t>(T), false);
  std::vector<double> nearest(static_cast<std::size_t>(T), std::numeric_limits<double>::infinity());
  auto take = [&](std::int64_t f) {
    chosen[static_cast<std::size_t>(f)] = true;
    for (std::int64_t i = 0; i < T; ++i)
      if (!chosen[static_cast<std::size_t>(i)])
        nearest[static_cast<std::size_t>(i)] = std::min(nearest[static_cast<std::size_t>(i)], dist2(i, f));
  };
  take(0);
  take(T - 1);
  for (std::int64_t picked = 2; picked < budget; ++picked) {
    std::int64_t best = -1;
    for (std::int64_t i = 0; i < T; ++i) {
      if (chosen[static_cast<std::size_t>(i)]) continue;
      if (best < 0 || nearest[static_cast<std::size_t>(i)] > nearest[static_cast<std::size_t>(best)]) best = i;
    }
    take(best);
  }
  KeyFrameSet out;
  for (std::int64_t i = 0; i < T; ++i)
    if (chosen[static_cast<std::size_t>(i)]) out.indices.push_back(i);
  return out;
}

/// Evenly spaced key frames (rounded), first and last included.
inline KeyFrameSet uniform_key_frames(std::int64_t num_frames, std::int64_t count) {
  if (count < 2 || count > num_frames) throw ArgumentError("key frame count out of range");
  KeyFrameSet out;
  for (std::int64_t k = 0; k < count; ++k)
    out.indices.push_back(static_cast<std::int64_t>(std::llround(static_cast<double>(k) * (num_frames - 1) / (count - 1))));
  return out;
}

/// Linear trajectory of a Gaussian blob in normalized [-1, 1] coordinates.
struct BlobPath {
  Vec3d start{};
  Vec3d end{};
  double sigma = 0.25;  // normalized units; +inf gives a constant field of ones
};

inline Volume4D synth_moving_gaussian(Dims3 dims, std::int64_t frames, const BlobPath& path) {
  if (dims.x < 8 || dims.y < 8 || dims.z < 8) throw ArgumentError("synthetic dims must be >= 8 per axis");
  if (frames < 2) throw ArgumentError("synthetic volume needs at least two frames");
  if (!(path.sigma > 0.0)) throw ArgumentError("sigma must be positive");

  Volume4D vol;
  vol.meta = {dims, frames, 0.0, 1.0, "moving_gaussian"};
  vol.values.resize(static_cast<std::size_t>(dims.count() * frames));
  const double inv = std::isinf(path.sigma) ? 0.0 : 1.0 / (2.0 * path.sigma * path.sigma);
  std::size_t o = 0;
  for (std::int64_t t = 0; t < frames; ++t) {
    const double s = static_cast<double>(t) / static_cast<double>(frames - 1);
    const Vec3d c = path.start + (path.end - path.start) * s;
    for (std::int64_t k = 0; k < dims.z; ++k)
      for (std::int64_t j = 0; j < dims.y; ++j)
        for (std::int64_t i = 0; i < dims.x; ++i) {
          const Vec3d p{vertex_to_unit(i, dims.x), vertex_to_unit(j, dims.y), vertex_to_unit(k, dims.z)};
          const Vec3d d = p - c;
          vol.values[o++] = static_cast<float>(std::exp(-dot(d, d) * inv));
        }
  }
  const auto [lo, hi] = std::minmax_element(vol.values.begin(), vol.values.end());
  vol.meta.value_min = *lo;
  vol.meta.value_max = *hi;
  return vol;
}

}  // namespace tvinr::io
