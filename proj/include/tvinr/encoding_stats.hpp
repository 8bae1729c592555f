// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "tvinr/baseline.hpp"
#include "tvinr/tesseract.hpp"

namespace tvinr::encoding {

struct LevelStats {
  std::int64_t vertices = 0;    // grid corners at this level
  std::int64_t buckets = 0;     // table entries allocated
  std::int64_t occupied = 0;    // entries hit by at least one corner
  std::int64_t collisions = 0;  // corners sharing a bucket with an earlier corner
  double utilization() const { return buckets ? static_cast<double>(occupied) / static_cast<double>(buckets) : 0.0; }
};

struct EncodingStats {
  std::int64_t param_count = 0;
  std::int64_t collision_count = 0;
  double bucket_utilization = 0.0;
  std::vector<LevelStats> levels;
};

namespace detail {

inline void finish(EncodingStats& s, std::int64_t features) {
  std::int64_t buckets = 0, occupied = 0;
  for (const auto& l : s.levels) {
    buckets += l.buckets;
    occupied += l.occupied;
    s.collision_count += l.collisions;
  }
  s.param_count = buckets * features;
  s.bucket_utilization = buckets ? static_cast<double>(occupied) / static_cast<double>(buckets) : 0.0;
}

class BucketTally {
 public:
  explicit BucketTally(std::int64_t buckets) : hit_(static_cast<std::size_t>(buckets), 0), stats_{} {
    stats_.buckets = buckets;
  }
  void add(std::int64_t b) {
    ++stats_.vertices;
    auto& h = hit_[static_cast<std::size_t>(b)];
    if (h)
      ++stats_.collisions;
    else
      ++stats_.occupied;
    h = 1;
  }
  LevelStats result() const { return stats_; }

 private:
  std::vector<std::uint8_t> hit_;
  LevelStats stats_;
};

}  // namespace detail

/// Exhaustive corner -> bucket mapping over every level.
template <class Scalar>
EncodingStats encoding_stats(const TesseractEncoder<Scalar>& enc) {
  EncodingStats s;
  for (std::size_t l = 0; l < enc.num_levels(); ++l) {
    const auto& lv = enc.levels()[l];
    detail::BucketTally tally(lv.table_size());
    for (std::int64_t t = 0; t < lv.res_t; ++t)
      for (std::int64_t z = 0; z < lv.res_z; ++z)
        for (std::int64_t y = 0; y < lv.res_y; ++y)
          for (std::int64_t x = 0; x < lv.res_x; ++x) tally.add(enc.bucket(l, t, x, y, z));
    s.levels.push_back(tally.result());
  }
  detail::finish(s, enc.embedding_size());
  return s;
}

template <class Scalar>
EncodingStats encoding_stats(const BaselineEncoder<Scalar>& enc) {
  EncodingStats s;
  for (std::size_t l = 0; l < enc.num_levels(); ++l) {
    const auto& r = enc.resolutions()[l];
    detail::BucketTally tally(enc.table_size(l));
    for (std::int64_t z = 0; z < r.z; ++z)
      for (std::int64_t y = 0; y < r.y; ++y)
        for (std::int64_t x = 0; x < r.x; ++x) tally.add(enc.bucket(l, x, y, z));
    s.levels.push_back(tally.result());
  }
  detail::finish(s, enc.embedding_size());
  return s;
}

/// Stats of a per-key-frame set: one prototype's stats replicated per frame.
template <class Scalar>
EncodingStats encoding_stats(const BaselineSet<Scalar>& set) {
  EncodingStats one = encoding_stats(set.prototype());
  EncodingStats s;
  const auto n = static_cast<std::int64_t>(set.key_times().size());
  for (std::int64_t k = 0; k < n; ++k) s.levels.insert(s.levels.end(), one.levels.begin(), one.levels.end());
  detail::finish(s, set.embedding_size());
  return s;
}

/// Parameter count of a configuration without allocating tables.
inline std::int64_t tesseract_param_count(const std::vector<LevelConfig>& levels, std::int64_t features) {
  std::int64_t n = 0;
  for (const auto& lv : levels) n += lv.table_size();
  return n * features;
}

/// Multi-resolution dense baseline that uses the largest per-axis resolution
/// of each F-Hash level on every axis, one encoder per key frame. Used to
/// compare parameter counts at matched level count and embedding size.
inline std::int64_t equal_axis_multires_param_count(const std::vector<LevelConfig>& levels, std::int64_t n_keys,
                                                    std::int64_t features) {
  std::int64_t n = 0;
  for (const auto& lv : levels) {
    const std::int64_t r = std::max({lv.res_x, lv.res_y, lv.res_z});
    n += r * r * r;
  }
  return n * n_keys * features;
}

}  // namespace tvinr::encoding
