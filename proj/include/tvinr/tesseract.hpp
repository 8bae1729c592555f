// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tvinr/common.hpp"

namespace tvinr::encoding {

/// Vertex counts of one resolution level of the Tesseract grid.
struct LevelConfig {
  int level = 1;  // 1-based, level 1 is the finest
  std::int64_t res_t = 2, res_x = 2, res_y = 2, res_z = 2;

  std::int64_t table_size() const { return res_t * res_x * res_y * res_z; }
  std::int64_t spatial_size() const { return res_x * res_y * res_z; }
  friend bool operator==(const LevelConfig&, const LevelConfig&) = default;
};

/// ceil(log_f(s)) computed exactly in integers.
inline int ceil_log(std::int64_t s, std::int64_t f) {
  int n = 0;
  std::int64_t p = 1;
  while (p < s) {
    p *= f;
    ++n;
  }
  return n;
}

/// Per-axis resolution schedule: level 1 is native, each next level divides
/// by the fold (rounding up) while the previous level exceeds the fold, and
/// pads with 2 afterwards, for `levels` levels in total.
inline std::vector<std::int64_t> axis_schedule(std::int64_t native, std::int64_t fold, int levels) {
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(levels));
  std::int64_t r = native;
  for (int l = 1; l <= levels; ++l) {
    if (l > 1) r = r > fold ? (r + fold - 1) / fold : 2;
    out.push_back(std::max<std::int64_t>(r, 2));
  }
  return out;
}

/// Multi-resolution configuration from the FBB vertex sizes and the number
/// of key frames. Every axis shares L_s = max ceil(log_f S) levels.
inline std::vector<LevelConfig> configure_levels(const Dims3& sizes, std::int64_t n_keys, std::int64_t fold) {
  if (sizes.x < 2 || sizes.y < 2 || sizes.z < 2) throw ArgumentError("FBB sizes must be >= 2 on every axis");
  if (n_keys < 2) throw ArgumentError("at least two key frames are required");
  if (fold < 2) throw ArgumentError("fold must be >= 2");
  const int ls = std::max({ceil_log(sizes.x, fold), ceil_log(sizes.y, fold), ceil_log(sizes.z, fold),
                           ceil_log(n_keys, fold), 1});
  const auto t = axis_schedule(n_keys, fold, ls);
  const auto x = axis_schedule(sizes.x, fold, ls);
  const auto y = axis_schedule(sizes.y, fold, ls);
  const auto z = axis_schedule(sizes.z, fold, ls);
  std::vector<LevelConfig> levels;
  for (int l = 0; l < ls; ++l)
    levels.push_back({l + 1, t[static_cast<std::size_t>(l)], x[static_cast<std::size_t>(l)], y[static_cast<std::size_t>(l)],
                      z[static_cast<std::size_t>(l)]});
  return levels;
}

/// Row-major 4D linearization: t*Rx*Ry*Rz + z*Rx*Ry + y*Rx + x.
inline std::int64_t fhash(const LevelConfig& lv, std::int64_t t, std::int64_t x, std::int64_t y, std::int64_t z) {
  if (t < 0 || t >= lv.res_t || x < 0 || x >= lv.res_x || y < 0 || y >= lv.res_y || z < 0 || z >= lv.res_z)
    throw BoundsError("fhash: corner index outside the level grid");
  return t * lv.res_x * lv.res_y * lv.res_z + z * lv.res_x * lv.res_y + y * lv.res_x + x;
}

enum class Linearization { row_major, morton };

namespace detail {

inline std::uint64_t morton4(std::uint64_t t, std::uint64_t x, std::uint64_t y, std::uint64_t z) {
  std::uint64_t code = 0;
  for (int b = 0; b < 16; ++b) {
    code |= ((x >> b) & 1u) << (4 * b);
    code |= ((y >> b) & 1u) << (4 * b + 1);
    code |= ((z >> b) & 1u) << (4 * b + 2);
    code |= ((t >> b) & 1u) << (4 * b + 3);
  }
  return code;
}

}  // namespace detail

/// Bijection row-major index -> rank of the corner in 4D Z-order. Ranking
/// (instead of the raw Morton code) keeps the table minimal for any shape.
inline std::vector<std::int64_t> morton_rank_table(const LevelConfig& lv) {
  const auto n = lv.table_size();
  std::vector<std::pair<std::uint64_t, std::int64_t>> codes(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < lv.res_t; ++t)
    for (std::int64_t z = 0; z < lv.res_z; ++z)
      for (std::int64_t y = 0; y < lv.res_y; ++y)
        for (std::int64_t x = 0; x < lv.res_x; ++x) {
          const auto rm = fhash(lv, t, x, y, z);
          codes[static_cast<std::size_t>(rm)] = {detail::morton4(t, x, y, z), rm};
        }
  std::sort(codes.begin(), codes.end());
  std::vector<std::int64_t> rank(static_cast<std::size_t>(n));
  for (std::int64_t r = 0; r < n; ++r) rank[static_cast<std::size_t>(codes[static_cast<std::size_t>(r)].second)] = r;
  return rank;
}

/// Cell lookup on an axis of `res` vertices spanning [-1, 1].
struct AxisCell {
  std::int64_t i0 = 0;
  double frac = 0.0;
};

inline AxisCell locate_axis(double p, std::int64_t res) {
  if (!(p >= -1.0 && p <= 1.0)) throw BoundsError("coordinate outside [-1, 1]");
  double u = (p + 1.0) * 0.5 * static_cast<double>(res - 1);
  const double r = std::round(u);
  if (std::abs(u - r) < 1e-9) u = r;
  auto i0 = static_cast<std::int64_t>(std::floor(u));
  i0 = std::clamp<std::int64_t>(i0, 0, res - 2);
  return {i0, u - static_cast<double>(i0)};
}

struct TimeBracket {
  std::int64_t index_prev = 0, index_next = 0;
  double t_prev = 0.0, t_next = 0.0;
  double weight = 0.0;  // 0 -> t_prev, 1 -> t_next
};

/// Temporal vertices of a level are Res_t uniformly spaced times over the
/// key-time range; returns the enclosing pair, or one vertex twice when the
/// query is on it.
inline TimeBracket locate_time_bracket(const LevelConfig& lv, std::span<const double> key_times, double t) {
  const double lo = key_times.empty() ? -1.0 : key_times.front();
  const double hi = key_times.empty() ? 1.0 : key_times.back();
  if (!(t >= lo && t <= hi)) throw BoundsError("time outside the key frame range");
  const auto c = locate_axis(t, lv.res_t);
  auto vertex_time = [&](std::int64_t i) { return vertex_to_unit(i, lv.res_t); };
  if (c.frac == 0.0) return {c.i0, c.i0, vertex_time(c.i0), vertex_time(c.i0), 0.0};
  if (c.frac == 1.0) return {c.i0 + 1, c.i0 + 1, vertex_time(c.i0 + 1), vertex_time(c.i0 + 1), 0.0};
  return {c.i0, c.i0 + 1, vertex_time(c.i0), vertex_time(c.i0 + 1), c.frac};
}

/// Multi-resolution Tesseract embedding grid addressed by F-Hash. Tables for
/// all levels live in one contiguous buffer of `table_size * F` scalars per level.
template <class Scalar>
class TesseractEncoder {
 public:
  using scalar_type = Scalar;

  TesseractEncoder() = default;

  TesseractEncoder(std::vector<LevelConfig> levels, std::int64_t fold, std::int64_t embedding_size,
                   std::vector<double> key_times, Linearization lin = Linearization::row_major)
      : levels_(std::move(levels)), fold_(fold), features_(embedding_size), key_times_(std::move(key_times)), lin_(lin) {
    if (levels_.empty()) throw ArgumentError("encoder needs at least one level");
    if (features_ < 1) throw ArgumentError("embedding size must be >= 1");
    if (fold_ < 2) throw ArgumentError("fold must be >= 2");
    std::int64_t off = 0;
    for (const auto& lv : levels_) {
      if (lv.res_t < 2 || lv.res_x < 2 || lv.res_y < 2 || lv.res_z < 2)
        throw ArgumentError("all level resolutions must be >= 2");
      offsets_.push_back(off);
      off += lv.table_size();
      if (lin_ == Linearization::morton) ranks_.push_back(morton_rank_table(lv));
    }
    offsets_.push_back(off);
    params_.assign(static_cast<std::size_t>(off * features_), Scalar(0));
  }

  static TesseractEncoder from_fbb(const Dims3& fbb_sizes, std::vector<double> key_times, std::int64_t fold,
                                   std::int64_t embedding_size, Linearization lin = Linearization::row_major) {
    auto levels = configure_levels(fbb_sizes, static_cast<std::int64_t>(key_times.size()), fold);
    return TesseractEncoder(std::move(levels), fold, embedding_size, std::move(key_times), lin);
  }

  const std::vector<LevelConfig>& levels() const { return levels_; }
  std::int64_t fold() const { return fold_; }
  std::int64_t embedding_size() const { return features_; }
  const std::vector<double>& key_times() const { return key_times_; }
  Linearization linearization() const { return lin_; }
  std::size_t num_levels() const { return levels_.size(); }
  std::size_t output_dim() const { return levels_.size() * static_cast<std::size_t>(features_); }
  /// Total number of table entries (buckets) across levels.
  std::int64_t num_entries() const { return offsets_.back(); }
  std::int64_t level_offset(std::size_t l) const { return offsets_[l]; }

  std::span<Scalar> params() { return params_; }
  std::span<const Scalar> params() const { return params_; }

  /// Bucket index of a corner within its level's table.
  std::int64_t bucket(std::size_t l, std::int64_t t, std::int64_t x, std::int64_t y, std::int64_t z) const {
    const auto rm = fhash(levels_[l], t, x, y, z);
    return ranks_.empty() ? rm : ranks_[l][static_cast<std::size_t>(rm)];
  }

  /// Visits the 16 Tesseract corners of every level as
  /// visit(level, global_entry, weight). Weights per level sum to one.
  template <class Visitor>
  void for_each_corner(const Query4<double>& q, Visitor&& visit) const {
    const double lo = key_times_.empty() ? -1.0 : key_times_.front();
    const double hi = key_times_.empty() ? 1.0 : key_times_.back();
    if (!(q.t >= lo && q.t <= hi)) throw BoundsError("query time outside the key frame range");
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      const auto& lv = levels_[l];
      const AxisCell ct = locate_axis(q.t, lv.res_t);
      const AxisCell cx = locate_axis(q.x, lv.res_x);
      const AxisCell cy = locate_axis(q.y, lv.res_y);
      const AxisCell cz = locate_axis(q.z, lv.res_z);
      const std::array<double, 2> wt{1.0 - ct.frac, ct.frac}, wx{1.0 - cx.frac, cx.frac}, wy{1.0 - cy.frac, cy.frac},
          wz{1.0 - cz.frac, cz.frac};
      const std::int64_t off = offsets_[l];
      if (ranks_.empty()) {
        // One hash of the base corner; the other 15 are fixed strides away.
        const std::int64_t base = fhash(lv, ct.i0, cx.i0, cy.i0, cz.i0);
        const std::int64_t sy = lv.res_x, sz = lv.res_x * lv.res_y, st = lv.spatial_size();
        for (int c = 0; c < 16; ++c) {
          const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1, dt = (c >> 3) & 1;
          visit(l, off + base + dt * st + dz * sz + dy * sy + dx, wt[dt] * wz[dz] * wy[dy] * wx[dx]);
        }
      } else {
        for (int c = 0; c < 16; ++c) {
          const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1, dt = (c >> 3) & 1;
          visit(l, off + bucket(l, ct.i0 + dt, cx.i0 + dx, cy.i0 + dy, cz.i0 + dz), wt[dt] * wz[dz] * wy[dy] * wx[dx]);
        }
      }
    }
  }

 private:
  std::vector<LevelConfig> levels_;
  std::int64_t fold_ = 2;
  std::int64_t features_ = 1;
  std::vector<double> key_times_;
  Linearization lin_ = Linearization::row_major;
  std::vector<std::int64_t> offsets_;
  std::vector<std::vector<std::int64_t>> ranks_;
  std::vector<Scalar> params_;
};

/// Interpolated per-level embeddings, concatenated: out[l*F + f].
template <class Encoder, class Scalar>
void encode(const Encoder& enc, const Query4<double>& q, std::span<Scalar> out) {
  const auto F = static_cast<std::size_t>(enc.embedding_size());
  if (out.size() != enc.output_dim()) throw ArgumentError("encode: output span has the wrong length");
  std::fill(out.begin(), out.end(), Scalar(0));
  const auto params = enc.params();
  enc.for_each_corner(q, [&](std::size_t l, std::int64_t entry, double w) {
    const auto* e = &params[static_cast<std::size_t>(entry) * F];
    for (std::size_t f = 0; f < F; ++f) out[l * F + f] += static_cast<Scalar>(w) * e[f];
  });
}

template <class Encoder>
std::vector<double> encode(const Encoder& enc, const Query4<double>& q) {
  std::vector<double> out(enc.output_dim());
  const auto F = static_cast<std::size_t>(enc.embedding_size());
  const auto params = enc.params();
  enc.for_each_corner(q, [&](std::size_t l, std::int64_t entry, double w) {
    for (std::size_t f = 0; f < F; ++f) out[l * F + f] += w * static_cast<double>(params[static_cast<std::size_t>(entry) * F + f]);
  });
  return out;
}

/// Scatters an upstream gradient (w.r.t. the encoded vector) onto table
/// parameters through the interpolation weights: sink(param_index, grad).
template <class Encoder, class Scalar, class Sink>
void encode_gradients(const Encoder& enc, const Query4<double>& q, std::span<const Scalar> upstream, Sink&& sink) {
  const auto F = static_cast<std::size_t>(enc.embedding_size());
  if (upstream.size() != enc.output_dim()) throw ArgumentError("encode_gradients: upstream has the wrong length");
  enc.for_each_corner(q, [&](std::size_t l, std::int64_t entry, double w) {
    for (std::size_t f = 0; f < F; ++f)
      sink(static_cast<std::size_t>(entry) * F + f, static_cast<Scalar>(w) * upstream[l * F + f]);
  });
}

}  // namespace tvinr::encoding
