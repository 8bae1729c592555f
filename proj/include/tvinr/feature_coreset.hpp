// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "tvinr/common.hpp"
#include "tvinr/occupancy.hpp"
#include "tvinr/volume_io.hpp"

namespace tvinr::coreset {

enum class FeatureKind { interval, isosurface, segmentation };

struct FeatureSpec {
  FeatureKind kind = FeatureKind::interval;
  double lo = 0.0, hi = 1.0;              // interval
  double isovalue = 0.5, epsilon = 0.0;   // isosurface
  double threshold = 0.5;                 // segmentation
  std::int64_t min_component = 1;         // segmentation, 6-connected voxels

  static FeatureSpec interval(double lo, double hi) {
    FeatureSpec s;
    s.kind = FeatureKind::interval;
    s.lo = lo;
    s.hi = hi;
    return s;
  }
  static FeatureSpec isosurface(double iso, double eps) {
    FeatureSpec s;
    s.kind = FeatureKind::isosurface;
    s.isovalue = iso;
    s.epsilon = eps;
    return s;
  }
  static FeatureSpec segmentation(double threshold, std::int64_t min_component = 1) {
    FeatureSpec s;
    s.kind = FeatureKind::segmentation;
    s.threshold = threshold;
    s.min_component = min_component;
    return s;
  }

  void validate() const {
    if (kind == FeatureKind::interval && !(lo <= hi)) throw ArgumentError("interval feature needs lo <= hi");
    if (kind == FeatureKind::isosurface && !(epsilon >= 0.0)) throw ArgumentError("isosurface epsilon must be >= 0");
    if (kind == FeatureKind::segmentation && min_component < 1) throw ArgumentError("min_component must be >= 1");
  }
};

inline FeatureSpec feature_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  FeatureSpec s;
  if (kind == "interval") {
    s = FeatureSpec::interval(j.at("lo").get<double>(), j.at("hi").get<double>());
  } else if (kind == "isosurface") {
    s = FeatureSpec::isosurface(j.at("isovalue").get<double>(), j.value("epsilon", 0.0));
  } else if (kind == "segmentation") {
    s = FeatureSpec::segmentation(j.at("threshold").get<double>(), j.value("min_component", std::int64_t{1}));
  } else {
    throw ArgumentError("unknown feature kind '" + kind + "'");
  }
  s.validate();
  return s;
}

inline nlohmann::json feature_to_json(const FeatureSpec& s) {
  switch (s.kind) {
    case FeatureKind::interval:
      return {{"kind", "interval"}, {"lo", s.lo}, {"hi", s.hi}};
    case FeatureKind::isosurface:
      return {{"kind", "isosurface"}, {"isovalue", s.isovalue}, {"epsilon", s.epsilon}};
    case FeatureKind::segmentation:
      return {{"kind", "segmentation"}, {"threshold", s.threshold}, {"min_component", s.min_component}};
  }
  return {};
}

/// Sorted linear vertex indices (X fastest).
using VertexSet = std::vector<std::int64_t>;

inline Index3 unlinear(std::int64_t v, const Dims3& d) { return {v % d.x, (v / d.x) % d.y, v / (d.x * d.y)}; }

namespace detail {

inline void segmentation_components(std::span<const float> frame, const Dims3& dims, const FeatureSpec& spec,
                                    VertexSet& out) {
  std::vector<std::uint8_t> state(frame.size(), 0);  // 0 = below, 1 = candidate, 2 = visited
  for (std::size_t i = 0; i < frame.size(); ++i) state[i] = frame[i] >= spec.threshold ? 1 : 0;
  if (spec.min_component <= 1) {
    for (std::size_t i = 0; i < frame.size(); ++i)
      if (state[i]) out.push_back(static_cast<std::int64_t>(i));
    return;
  }
  std::vector<std::int64_t> comp;
  std::deque<std::int64_t> queue;
  for (std::size_t s = 0; s < frame.size(); ++s) {
    if (state[s] != 1) continue;
    comp.clear();
    queue.push_back(static_cast<std::int64_t>(s));
    state[s] = 2;
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop_front();
      comp.push_back(v);
      const Index3 p = unlinear(v, dims);
      const std::array<Index3, 6> nb = {{{p.x - 1, p.y, p.z},
                                         {p.x + 1, p.y, p.z},
                                         {p.x, p.y - 1, p.z},
                                         {p.x, p.y + 1, p.z},
                                         {p.x, p.y, p.z - 1},
                                         {p.x, p.y, p.z + 1}}};
      for (const auto& q : nb) {
        if (q.x < 0 || q.y < 0 || q.z < 0 || q.x >= dims.x || q.y >= dims.y || q.z >= dims.z) continue;
        const auto w = dims.linear(q.x, q.y, q.z);
        if (state[static_cast<std::size_t>(w)] == 1) {
          state[static_cast<std::size_t>(w)] = 2;
          queue.push_back(w);
        }
      }
    }
    if (static_cast<std::int64_t>(comp.size()) >= spec.min_component) out.insert(out.end(), comp.begin(), comp.end());
  }
  std::sort(out.begin(), out.end());
}

}  // namespace detail

inline VertexSet extract_feature(std::span<const float> frame, const Dims3& dims, const FeatureSpec& spec) {
  spec.validate();
  if (static_cast<std::int64_t>(frame.size()) != dims.count()) throw ArgumentError("frame size does not match dims");
  VertexSet out;
  switch (spec.kind) {
    case FeatureKind::interval:
      for (std::size_t i = 0; i < frame.size(); ++i)
        if (frame[i] >= spec.lo && frame[i] <= spec.hi) out.push_back(static_cast<std::int64_t>(i));
      break;
    case FeatureKind::isosurface: {
      std::vector<std::uint8_t> in(frame.size(), 0);
      for (std::size_t i = 0; i < frame.size(); ++i)
        if (std::abs(frame[i] - spec.isovalue) <= spec.epsilon) in[i] = 1;
      // Corners of every cell whose value range contains the isovalue.
      for (std::int64_t k = 0; k + 1 < dims.z; ++k)
        for (std::int64_t j = 0; j + 1 < dims.y; ++j)
          for (std::int64_t i = 0; i + 1 < dims.x; ++i) {
            float mn = 2.0f, mx = -1.0f;
            for (int c = 0; c < 8; ++c) {
              const float v = frame[static_cast<std::size_t>(dims.linear(i + (c & 1), j + ((c >> 1) & 1), k + (c >> 2)))];
              mn = std::min(mn, v);
              mx = std::max(mx, v);
            }
            if (mn <= spec.isovalue && spec.isovalue <= mx)
              for (int c = 0; c < 8; ++c)
                in[static_cast<std::size_t>(dims.linear(i + (c & 1), j + ((c >> 1) & 1), k + (c >> 2)))] = 1;
          }
      for (std::size_t i = 0; i < in.size(); ++i)
        if (in[i]) out.push_back(static_cast<std::int64_t>(i));
      break;
    }
    case FeatureKind::segmentation:
      detail::segmentation_components(frame, dims, spec, out);
      break;
  }
  return out;
}

/// f_k plus its 26-neighbourhood, clamped at the grid boundary.
inline VertexSet dilate_feature(const VertexSet& feature, const Dims3& dims) {
  std::unordered_set<std::int64_t> region;
  region.reserve(feature.size() * 4);
  for (const auto v : feature) {
    const Index3 p = unlinear(v, dims);
    for (std::int64_t dz = -1; dz <= 1; ++dz)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          const Index3 q{p.x + dx, p.y + dy, p.z + dz};
          if (q.x < 0 || q.y < 0 || q.z < 0 || q.x >= dims.x || q.y >= dims.y || q.z >= dims.z) continue;
          region.insert(dims.linear(q.x, q.y, q.z));
        }
  }
  VertexSet out(region.begin(), region.end());
  std::sort(out.begin(), out.end());
  return out;
}

/// Cell bit set iff any of its eight corner vertices is in `region`.
inline OccupancyGrid build_occupancy(const VertexSet& region, const Dims3& dims, double frame_time = 0.0) {
  auto grid = OccupancyGrid::for_vertex_dims(dims, frame_time);
  const Dims3 cells = grid.cells();
  for (const auto v : region) {
    const Index3 p = unlinear(v, dims);
    for (std::int64_t dz = -1; dz <= 0; ++dz)
      for (std::int64_t dy = -1; dy <= 0; ++dy)
        for (std::int64_t dx = -1; dx <= 0; ++dx) {
          const Index3 c{p.x + dx, p.y + dy, p.z + dz};
          if (c.x < 0 || c.y < 0 || c.z < 0 || c.x >= cells.x || c.y >= cells.y || c.z >= cells.z) continue;
          grid.set(c.x, c.y, c.z);
        }
  }
  return grid;
}

/// Inclusive vertex-index box.
struct Box3 {
  Index3 lo, hi;
  friend bool operator==(const Box3&, const Box3&) = default;
  bool contains(const Index3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }
  bool contains(const Box3& b) const { return contains(b.lo) && contains(b.hi); }
};

inline std::optional<Box3> bounding_box(const VertexSet& region, const Dims3& dims) {
  if (region.empty()) return std::nullopt;
  Box3 b{unlinear(region.front(), dims), unlinear(region.front(), dims)};
  for (const auto v : region) {
    const Index3 p = unlinear(v, dims);
    b.lo = {std::min(b.lo.x, p.x), std::min(b.lo.y, p.y), std::min(b.lo.z, p.z)};
    b.hi = {std::max(b.hi.x, p.x), std::max(b.hi.y, p.y), std::max(b.hi.z, p.z)};
  }
  return b;
}

/// Feature Bounding Box: the union of all per-key-frame boxes, in vertex
/// indices of the volume, with derived centroid and size in normalized units.
struct FeatureBoundingBox {
  Box3 box;
  Dims3 volume_dims;

  /// Native vertex resolution per axis (S_x, S_y, S_z).
  Dims3 sizes() const { return {box.hi.x - box.lo.x + 1, box.hi.y - box.lo.y + 1, box.hi.z - box.lo.z + 1}; }
  Vec3d origin() const {
    return (normalize_lo() + normalize_hi()) * 0.5;
  }
  Vec3d size() const { return normalize_hi() - normalize_lo(); }
  Vec3d normalize_lo() const {
    return {vertex_to_unit(box.lo.x, volume_dims.x), vertex_to_unit(box.lo.y, volume_dims.y),
            vertex_to_unit(box.lo.z, volume_dims.z)};
  }
  Vec3d normalize_hi() const {
    return {vertex_to_unit(box.hi.x, volume_dims.x), vertex_to_unit(box.hi.y, volume_dims.y),
            vertex_to_unit(box.hi.z, volume_dims.z)};
  }
  friend bool operator==(const FeatureBoundingBox&, const FeatureBoundingBox&) = default;
};

inline FeatureBoundingBox fuse_fbb(std::span<const std::optional<Box3>> boxes, const Dims3& volume_dims) {
  std::optional<Box3> fused;
  for (const auto& b : boxes) {
    if (!b) continue;
    if (!fused) {
      fused = *b;
      continue;
    }
    fused->lo = {std::min(fused->lo.x, b->lo.x), std::min(fused->lo.y, b->lo.y), std::min(fused->lo.z, b->lo.z)};
    fused->hi = {std::max(fused->hi.x, b->hi.x), std::max(fused->hi.y, b->hi.y), std::max(fused->hi.z, b->hi.z)};
  }
  if (!fused) throw FeatureNotFoundError("feature is empty in every key frame");
  // Single-vertex axes are widened to two vertices.
  auto pad = [](std::int64_t& lo, std::int64_t& hi, std::int64_t n) {
    if (lo != hi) return;
    if (hi + 1 < n)
      ++hi;
    else
      --lo;
  };
  pad(fused->lo.x, fused->hi.x, volume_dims.x);
  pad(fused->lo.y, fused->hi.y, volume_dims.y);
  pad(fused->lo.z, fused->hi.z, volume_dims.z);
  return {*fused, volume_dims};
}

/// Translate by the FBB centroid, then scale by 2/size, per axis.
inline Vec3d to_fbb_coords(const Vec3d& p, const FeatureBoundingBox& fbb) {
  const Vec3d lo = fbb.normalize_lo(), hi = fbb.normalize_hi();
  constexpr double kSlack = 1e-9;
  for (int a = 0; a < 3; ++a)
    if (p[a] < lo[a] - kSlack || p[a] > hi[a] + kSlack) throw BoundsError("point lies outside the feature bounding box");
  const Vec3d o = fbb.origin(), s = fbb.size();
  Vec3d q;
  for (int a = 0; a < 3; ++a) q[a] = std::clamp((p[a] - o[a]) * (2.0 / s[a]), -1.0, 1.0);
  return q;
}

inline Vec3d from_fbb_coords(const Vec3d& q, const FeatureBoundingBox& fbb) {
  const Vec3d o = fbb.origin(), s = fbb.size();
  return {o.x + q.x * s.x * 0.5, o.y + q.y * s.y * 0.5, o.z + q.z * s.z * 0.5};
}

inline bool inside_fbb(const Vec3d& p, const FeatureBoundingBox& fbb) {
  const Vec3d lo = fbb.normalize_lo(), hi = fbb.normalize_hi();
  for (int a = 0; a < 3; ++a)
    if (p[a] < lo[a] || p[a] > hi[a]) return false;
  return true;
}

/// FBB-local coordinate of a volume vertex, computed in index space so
/// FBB corners land exactly on -1 and +1.
inline Vec3d vertex_fbb_coords(const Index3& v, const FeatureBoundingBox& fbb) {
  if (!fbb.box.contains(v)) throw BoundsError("vertex lies outside the feature bounding box");
  const Dims3 s = fbb.sizes();
  return {vertex_to_unit(v.x - fbb.box.lo.x, s.x), vertex_to_unit(v.y - fbb.box.lo.y, s.y),
          vertex_to_unit(v.z - fbb.box.lo.z, s.z)};
}

struct Sample {
  std::array<float, 4> coords;  // t, x, y, z
  float value;
};

struct Coreset {
  std::vector<Sample> samples;
  std::size_t size() const { return samples.size(); }
};

struct CoresetResult {
  Coreset coreset;
  FeatureBoundingBox fbb;
  std::vector<OccupancyGrid> occupancy;  // one per key frame
  std::vector<VertexSet> features;       // f_k
  std::vector<VertexSet> regions;        // d_k
  std::vector<double> key_times;
};

/// Extract -> dilate -> occupancy -> bounding boxes -> fuse -> translate/scale
/// -> append time, unioned over key frames.
inline CoresetResult build_coreset(const io::Volume4D& vol, const io::KeyFrameSet& keys, const FeatureSpec& spec) {
  keys.validate(vol.meta.num_frames);
  spec.validate();
  const Dims3 dims = vol.meta.dims;
  CoresetResult r;
  r.key_times = keys.times();
  std::vector<std::optional<Box3>> boxes;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    r.features.push_back(extract_feature(vol.frame(keys.indices[k]), dims, spec));
    r.regions.push_back(dilate_feature(r.features.back(), dims));
    r.occupancy.push_back(build_occupancy(r.regions.back(), dims, r.key_times[k]));
    boxes.push_back(bounding_box(r.regions.back(), dims));
  }
  r.fbb = fuse_fbb(boxes, dims);
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const auto frame = vol.frame(keys.indices[k]);
    const auto t = static_cast<float>(r.key_times[k]);
    for (const auto v : r.regions[k]) {
      const Vec3d q = vertex_fbb_coords(unlinear(v, dims), r.fbb);
      r.coreset.samples.push_back(
          {{t, static_cast<float>(q.x), static_cast<float>(q.y), static_cast<float>(q.z)}, frame[static_cast<std::size_t>(v)]});
    }
  }
  return r;
}

inline void save_coreset(const Coreset& c, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "coreset I/O assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& s : c.samples) {
    out.write(reinterpret_cast<const char*>(s.coords.data()), 16);
    out.write(reinterpret_cast<const char*>(&s.value), 4);
  }
}

inline Coreset load_coreset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open coreset " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 20 != 0) throw FormatError(path.string() + ": size is not a multiple of the 20-byte record");
  Coreset c;
  c.samples.resize(bytes.size() / 20);
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    std::memcpy(c.samples[i].coords.data(), bytes.data() + 20 * i, 16);
    std::memcpy(&c.samples[i].value, bytes.data() + 20 * i + 16, 4);
  }
  return c;
}

inline nlohmann::json fbb_to_json(const FeatureBoundingBox& f) {
  return {{"lo", {f.box.lo.x, f.box.lo.y, f.box.lo.z}},
          {"hi", {f.box.hi.x, f.box.hi.y, f.box.hi.z}},
          {"volume_dims", {f.volume_dims.x, f.volume_dims.y, f.volume_dims.z}}};
}

inline FeatureBoundingBox fbb_from_json(const nlohmann::json& j) {
  auto i3 = [](const nlohmann::json& a) { return Index3{a.at(0).get<std::int64_t>(), a.at(1).get<std::int64_t>(), a.at(2).get<std::int64_t>()}; };
  const Index3 d = i3(j.at("volume_dims"));
  return {{i3(j.at("lo")), i3(j.at("hi"))}, {d.x, d.y, d.z}};
}

}  // namespace tvinr::coreset
