// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tvinr/common.hpp"
#include "tvinr/tesseract.hpp"

namespace tvinr::encoding {

enum class BaselineKind { dense_single, dense_multi, mhe_spatial_hash };

inline const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::dense_single: return "dense_single";
    case BaselineKind::dense_multi: return "dense_multi";
    case BaselineKind::mhe_spatial_hash: return "mhe_spatial_hash";
  }
  return "?";
}

inline constexpr std::array<std::uint32_t, 3> kSpatialHashPrimes = {1u, 2654435761u, 805459861u};

/// Spatial hash ((x*p1) ^ (y*p2) ^ (z*p3)) mod T in 32-bit arithmetic.
inline std::int64_t spatial_hash(std::int64_t x, std::int64_t y, std::int64_t z, std::int64_t table_size) {
  const std::uint32_t h = (static_cast<std::uint32_t>(x) * kSpatialHashPrimes[0]) ^
                          (static_cast<std::uint32_t>(y) * kSpatialHashPrimes[1]) ^
                          (static_cast<std::uint32_t>(z) * kSpatialHashPrimes[2]);
  return static_cast<std::int64_t>(h % static_cast<std::uint32_t>(table_size));
}

/// Per-frame 3D grid encoder used for comparison: single or multi-resolution
/// dense grids, or a multi-resolution spatial hash with one fixed table size.
template <class Scalar>
class BaselineEncoder {
 public:
  using scalar_type = Scalar;

  BaselineEncoder() = default;

  BaselineEncoder(BaselineKind kind, std::vector<Dims3> resolutions, std::int64_t embedding_size,
                  std::int64_t hash_table_size = 0)
      : kind_(kind), res_(std::move(resolutions)), features_(embedding_size), hash_size_(hash_table_size) {
    if (res_.empty()) throw ArgumentError("baseline encoder needs at least one level");
    if (kind_ == BaselineKind::dense_single && res_.size() != 1)
      throw ArgumentError("dense_single has exactly one level");
    if (features_ < 1) throw ArgumentError("embedding size must be >= 1");
    if (kind_ == BaselineKind::mhe_spatial_hash) {
      if (hash_size_ < 1) throw ArgumentError("spatial hash needs a positive table size");
      for (const auto& r : res_)
        if (r.x != r.y || r.y != r.z) throw ArgumentError("spatial hash levels use one resolution for all axes");
    }
    std::int64_t off = 0;
    for (const auto& r : res_) {
      if (r.x < 2 || r.y < 2 || r.z < 2) throw ArgumentError("baseline resolutions must be >= 2");
      offsets_.push_back(off);
      off += table_size(offsets_.size() - 1);
    }
    offsets_.push_back(off);
    params_.assign(static_cast<std::size_t>(off * features_), Scalar(0));
  }

  BaselineKind kind() const { return kind_; }
  const std::vector<Dims3>& resolutions() const { return res_; }
  std::int64_t embedding_size() const { return features_; }
  std::int64_t hash_table_size() const { return hash_size_; }
  std::size_t num_levels() const { return res_.size(); }
  std::size_t output_dim() const { return res_.size() * static_cast<std::size_t>(features_); }
  std::int64_t num_entries() const { return offsets_.back(); }
  std::int64_t level_offset(std::size_t l) const { return offsets_[l]; }

  /// Buckets allocated for level l: the vertex count for dense grids, T for the hash.
  std::int64_t table_size(std::size_t l) const {
    return kind_ == BaselineKind::mhe_spatial_hash ? hash_size_ : res_[l].count();
  }

  std::span<Scalar> params() { return params_; }
  std::span<const Scalar> params() const { return params_; }

  std::int64_t bucket(std::size_t l, std::int64_t x, std::int64_t y, std::int64_t z) const {
    const auto& r = res_[l];
    if (x < 0 || y < 0 || z < 0 || x >= r.x || y >= r.y || z >= r.z) throw BoundsError("baseline corner out of range");
    if (kind_ == BaselineKind::mhe_spatial_hash && r.count() > hash_size_) return spatial_hash(x, y, z, hash_size_);
    return r.linear(x, y, z);
  }

  /// Visits the 8 trilinear corners of every level; the time component is ignored.
  template <class Visitor>
  void for_each_corner(const Query4<double>& q, Visitor&& visit) const {
    for_each_corner_offset(q, 0, visit);
  }

  template <class Visitor>
  void for_each_corner_offset(const Query4<double>& q, std::int64_t entry_offset, Visitor&& visit) const {
    for (std::size_t l = 0; l < res_.size(); ++l) {
      const auto& r = res_[l];
      const AxisCell cx = locate_axis(q.x, r.x), cy = locate_axis(q.y, r.y), cz = locate_axis(q.z, r.z);
      const std::array<double, 2> wx{1.0 - cx.frac, cx.frac}, wy{1.0 - cy.frac, cy.frac}, wz{1.0 - cz.frac, cz.frac};
      for (int c = 0; c < 8; ++c) {
        const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
        visit(l, entry_offset + offsets_[l] + bucket(l, cx.i0 + dx, cy.i0 + dy, cz.i0 + dz), wz[dz] * wy[dy] * wx[dx]);
      }
    }
  }

 private:
  BaselineKind kind_ = BaselineKind::dense_single;
  std::vector<Dims3> res_;
  std::int64_t features_ = 1;
  std::int64_t hash_size_ = 0;
  std::vector<std::int64_t> offsets_;
  std::vector<Scalar> params_;
};

template <class Scalar>
std::vector<double> baseline_encode(const BaselineEncoder<Scalar>& enc, const Vec3d& q) {
  return encode(enc, Query4<double>{0.0, q.x, q.y, q.z});
}

/// One baseline encoder per key frame sharing a single parameter buffer. A
/// query is routed to the key frame nearest to its time.
template <class Scalar>
class BaselineSet {
 public:
  using scalar_type = Scalar;

  BaselineSet() = default;
  BaselineSet(BaselineEncoder<Scalar> prototype, std::vector<double> key_times)
      : proto_(std::move(prototype)), key_times_(std::move(key_times)) {
    if (key_times_.empty()) throw ArgumentError("baseline set needs at least one key frame");
    params_.assign(static_cast<std::size_t>(num_entries() * proto_.embedding_size()), Scalar(0));
  }

  const BaselineEncoder<Scalar>& prototype() const { return proto_; }
  const std::vector<double>& key_times() const { return key_times_; }
  std::int64_t embedding_size() const { return proto_.embedding_size(); }
  std::size_t num_levels() const { return proto_.num_levels(); }
  std::size_t output_dim() const { return proto_.output_dim(); }
  std::int64_t num_entries() const { return proto_.num_entries() * static_cast<std::int64_t>(key_times_.size()); }
  std::span<Scalar> params() { return params_; }
  std::span<const Scalar> params() const { return params_; }

  std::size_t frame_for(double t) const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < key_times_.size(); ++k)
      if (std::abs(key_times_[k] - t) < std::abs(key_times_[best] - t)) best = k;
    return best;
  }

  template <class Visitor>
  void for_each_corner(const Query4<double>& q, Visitor&& visit) const {
    const auto k = static_cast<std::int64_t>(frame_for(q.t));
    proto_.for_each_corner_offset(q, k * proto_.num_entries(), visit);
  }

 private:
  BaselineEncoder<Scalar> proto_;
  std::vector<double> key_times_;
  std::vector<Scalar> params_;
};

}  // namespace tvinr::encoding
