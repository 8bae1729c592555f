// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "tvinr/common.hpp"
#include "tvinr/morton.hpp"

namespace tvinr::coreset {

/// One bit per cell of a vertex grid, addressed by Morton index. A vertex
/// grid of (Dx, Dy, Dz) vertices has (Dx-1, Dy-1, Dz-1) cells.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;

  /// `cells` are cell counts per axis; `frame_time` is the normalized key time.
  explicit OccupancyGrid(Dims3 cells, double frame_time = 0.0) : cells_(cells), frame_time_(frame_time) {
    if (cells.x < 1 || cells.y < 1 || cells.z < 1) throw ArgumentError("occupancy grid needs at least one cell per axis");
    const std::uint64_t last = morton_encode(static_cast<std::uint64_t>(cells.x - 1), static_cast<std::uint64_t>(cells.y - 1),
                                             static_cast<std::uint64_t>(cells.z - 1));
    words_.assign(static_cast<std::size_t>(last / 64 + 1), 0);
  }

  static OccupancyGrid for_vertex_dims(Dims3 vertices, double frame_time = 0.0) {
    return OccupancyGrid({vertices.x - 1, vertices.y - 1, vertices.z - 1}, frame_time);
  }

  const Dims3& cells() const { return cells_; }
  Dims3 vertex_dims() const { return {cells_.x + 1, cells_.y + 1, cells_.z + 1}; }
  double frame_time() const { return frame_time_; }
  void set_frame_time(double t) { frame_time_ = t; }
  std::span<const std::uint64_t> words() const { return words_; }

  bool in_bounds(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < cells_.x && j < cells_.y && k < cells_.z;
  }

  bool test(std::int64_t i, std::int64_t j, std::int64_t k) const {
    const auto m = code(i, j, k);
    return (words_[m >> 6] >> (m & 63)) & 1u;
  }
  void set(std::int64_t i, std::int64_t j, std::int64_t k, bool on = true) {
    const auto m = code(i, j, k);
    if (on)
      words_[m >> 6] |= std::uint64_t{1} << (m & 63);
    else
      words_[m >> 6] &= ~(std::uint64_t{1} << (m & 63));
  }

  std::int64_t popcount() const {
    std::int64_t n = 0;
    for (auto w : words_) n += std::popcount(w);
    return n;
  }

  /// Cell containing a point of the normalized [-1, 1]^3 volume box, or
  /// false if the point lies outside (beyond rounding slack).
  bool cell_of(const Vec3d& p, Index3& out) const {
    std::int64_t c[3];
    const std::int64_t n[3] = {cells_.x, cells_.y, cells_.z};
    for (int a = 0; a < 3; ++a) {
      if (!(p[a] >= -1.0 - 1e-9 && p[a] <= 1.0 + 1e-9)) return false;
      const double u = (p[a] + 1.0) * 0.5 * static_cast<double>(n[a]);
      c[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(u)), 0, n[a] - 1);
    }
    out = {c[0], c[1], c[2]};
    return true;
  }

  bool occupied_at(const Vec3d& p) const {
    Index3 c;
    return cell_of(p, c) && test(c.x, c.y, c.z);
  }

  friend bool operator==(const OccupancyGrid& a, const OccupancyGrid& b) {
    return a.cells_ == b.cells_ && a.words_ == b.words_;
  }

  std::vector<std::uint64_t>& mutable_words() { return words_; }

 private:
  std::uint64_t code(std::int64_t i, std::int64_t j, std::int64_t k) const {
    if (!in_bounds(i, j, k)) throw BoundsError("occupancy cell index out of range");
    return morton_encode(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k));
  }

  Dims3 cells_{};
  double frame_time_ = 0.0;
  std::vector<std::uint64_t> words_;
};

/// Bitwise OR of grids with identical dimensions.
inline OccupancyGrid merge_occupancy(std::span<const OccupancyGrid> grids) {
  if (grids.empty()) throw ArgumentError("merge_occupancy needs at least one grid");
  OccupancyGrid out = grids.front();
  for (const auto& g : grids.subspan(1)) {
    if (!(g.cells() == out.cells())) throw ArgumentError("merge_occupancy: grid dimensions differ");
    auto& w = out.mutable_words();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] |= g.words()[i];
  }
  return out;
}

/// Occupancy at time t between two key grids. A cell is set iff
/// (1-w)*a + w*b >= 0.5 with w = (t - t_a)/(t_b - t_a); exact ties are set.
inline OccupancyGrid interp_occupancy(const OccupancyGrid& a, const OccupancyGrid& b, double t) {
  if (!(a.cells() == b.cells())) throw ArgumentError("interp_occupancy: grid dimensions differ");
  const double ta = a.frame_time(), tb = b.frame_time();
  if (!(ta < tb)) throw ArgumentError("interp_occupancy: key times must be increasing");
  if (!(t >= ta && t <= tb)) throw ArgumentError("interp_occupancy: t outside the key interval");
  const double w = (t - ta) / (tb - ta);
  OccupancyGrid out(a.cells(), t);
  // Per bit the outcome only depends on the (bitA, bitB) pair, so whole words blend at once.
  const bool keep_a_only = (1.0 - w) >= 0.5;
  const bool keep_b_only = w >= 0.5;
  auto& o = out.mutable_words();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const auto wa = a.words()[i], wb = b.words()[i];
    std::uint64_t bits = wa & wb;
    if (keep_a_only) bits |= wa & ~wb;
    if (keep_b_only) bits |= wb & ~wa;
    o[i] = bits;
  }
  return out;
}

// On-disk layout: "TVINROCC", u32 version, u32 reserved, i64 cells[3],
// f64 frame_time, u64 word count, then little-endian u64 words.
inline constexpr char kOccupancyMagic[8] = {'T', 'V', 'I', 'N', 'R', 'O', 'C', 'C'};
inline constexpr std::uint32_t kOccupancyVersion = 1;

inline void save_occupancy(const OccupancyGrid& g, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "occupancy I/O assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  out.write(kOccupancyMagic, 8);
  put(kOccupancyVersion);
  put(std::uint32_t{0});
  put(g.cells().x);
  put(g.cells().y);
  put(g.cells().z);
  put(g.frame_time());
  put(static_cast<std::uint64_t>(g.words().size()));
  out.write(reinterpret_cast<const char*>(g.words().data()), static_cast<std::streamsize>(g.words().size() * 8));
}

inline OccupancyGrid load_occupancy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open occupancy grid " + path.string());
  auto get = [&](auto& v) {
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
      throw FormatError(path.string() + ": truncated occupancy header");
  };
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kOccupancyMagic, 8) != 0)
    throw FormatError(path.string() + ": not an occupancy grid");
  std::uint32_t version = 0, reserved = 0;
  get(version);
  get(reserved);
  if (version != kOccupancyVersion) throw FormatError(path.string() + ": unsupported occupancy version");
  Dims3 cells;
  double t = 0.0;
  std::uint64_t nwords = 0;
  get(cells.x);
  get(cells.y);
  get(cells.z);
  get(t);
  get(nwords);
  OccupancyGrid g(cells, t);
  if (nwords != g.words().size()) throw FormatError(path.string() + ": word count does not match dims");
  auto& w = g.mutable_words();
  if (!in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(nwords * 8)))
    throw FormatError(path.string() + ": truncated occupancy payload");
  return g;
}

}  // namespace tvinr::coreset
