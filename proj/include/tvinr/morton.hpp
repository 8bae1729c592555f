// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "tvinr/common.hpp"

namespace tvinr {

inline constexpr std::uint64_t kMortonAxisLimit = std::uint64_t{1} << 21;

namespace detail {

// Spreads the low 21 bits of v so that bit i lands at bit 3i.
constexpr std::uint64_t spread_bits3(std::uint64_t v) {
  v &= 0x1fffffull;
  v = (v | (v << 32)) & 0x001f00000000ffffull;
  v = (v | (v << 16)) & 0x001f0000ff0000ffull;
  v = (v | (v << 8)) & 0x100f00f00f00f00full;
  v = (v | (v << 4)) & 0x10c30c30c30c30c3ull;
  v = (v | (v << 2)) & 0x1249249249249249ull;
  return v;
}

constexpr std::uint64_t compact_bits3(std::uint64_t v) {
  v &= 0x1249249249249249ull;
  v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ull;
  v = (v ^ (v >> 4)) & 0x100f00f00f00f00full;
  v = (v ^ (v >> 8)) & 0x001f0000ff0000ffull;
  v = (v ^ (v >> 16)) & 0x001f00000000ffffull;
  v = (v ^ (v >> 32)) & 0x1fffffull;
  return v;
}

}  // namespace detail

/// Z-order index with x in bit 0, y in bit 1, z in bit 2.
inline std::uint64_t morton_encode(std::uint64_t x, std::uint64_t y, std::uint64_t z) {
  if (x >= kMortonAxisLimit || y >= kMortonAxisLimit || z >= kMortonAxisLimit)
    throw ArgumentError("morton_encode: index exceeds 21 bits");
  return detail::spread_bits3(x) | (detail::spread_bits3(y) << 1) | (detail::spread_bits3(z) << 2);
}

inline Index3 morton_decode(std::uint64_t code) {
  return {static_cast<std::int64_t>(detail::compact_bits3(code)),
          static_cast<std::int64_t>(detail::compact_bits3(code >> 1)),
          static_cast<std::int64_t>(detail::compact_bits3(code >> 2))};
}

}  // namespace tvinr
