// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tvinr/common.hpp"
#include "tvinr/metrics.hpp"

namespace tvinr::png {

/// Float [0, 1] image to 8-bit RGBA, rounding to nearest.
inline std::vector<std::uint8_t> to_rgba8(const metrics::Image& im) {
  std::vector<std::uint8_t> out(im.rgba.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(im.rgba[i], 0.0f, 1.0f) * 255.0f));
  return out;
}

namespace detail {

inline void on_warning(png_structp, png_const_charp) {}
[[noreturn]] inline void on_error(png_structp p, png_const_charp) { png_longjmp(p, 1); }

inline void write_to_vector(png_structp p, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
  out->insert(out->end(), data, data + n);
}
inline void flush_noop(png_structp) {}

struct ReadCursor {
  const std::uint8_t* data;
  std::size_t size, pos;
};

inline void read_from_buffer(png_structp p, png_bytep out, png_size_t n) {
  auto* c = static_cast<ReadCursor*>(png_get_io_ptr(p));
  if (c->size - c->pos < n) png_error(p, "unexpected end of data");
  std::memcpy(out, c->data + c->pos, n);
  c->pos += n;
}

}  // namespace detail

/// 8-bit RGBA PNG in memory. Output bytes depend only on the pixels.
inline std::vector<std::uint8_t> encode(const metrics::Image& im) {
  if (im.width < 1 || im.height < 1) throw ArgumentError("png: empty image");
  const auto px = to_rgba8(im);
  std::vector<std::uint8_t> out;
  png_structp p = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::on_error, detail::on_warning);
  if (!p) throw FormatError("png: cannot create writer");
  png_infop info = png_create_info_struct(p);
  // libpng reports errors by longjmp; everything with a destructor lives above this point.
  if (setjmp(png_jmpbuf(p))) {
    png_destroy_write_struct(&p, &info);
    throw FormatError("png: encoding failed");
  }
  {
    png_set_write_fn(p, &out, detail::write_to_vector, detail::flush_noop);
    png_set_IHDR(p, info, static_cast<png_uint_32>(im.width), static_cast<png_uint_32>(im.height), 8, PNG_COLOR_TYPE_RGBA,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(p, info);
    for (int y = 0; y < im.height; ++y)
      png_write_row(p, const_cast<png_bytep>(px.data() + static_cast<std::size_t>(y) * im.width * 4));
    png_write_end(p, nullptr);
  }
  png_destroy_write_struct(&p, &info);
  return out;
}

struct Rgba8 {
  int width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
};

inline Rgba8 decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("png: bad signature");
  Rgba8 out;
  detail::ReadCursor cur{bytes.data(), bytes.size(), 0};
  png_structp p = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::on_error, detail::on_warning);
  if (!p) throw FormatError("png: cannot create reader");
  png_infop info = png_create_info_struct(p);
  if (setjmp(png_jmpbuf(p))) {
    png_destroy_read_struct(&p, &info, nullptr);
    throw FormatError("png: corrupt or truncated data");
  }
  {
    png_set_read_fn(p, &cur, detail::read_from_buffer);
    png_read_info(p, info);
    png_set_expand(p);
    png_set_strip_16(p);
    png_set_gray_to_rgb(p);
    png_set_add_alpha(p, 0xff, PNG_FILLER_AFTER);
    png_read_update_info(p, info);
    out.width = static_cast<int>(png_get_image_width(p, info));
    out.height = static_cast<int>(png_get_image_height(p, info));
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 4);
    for (int y = 0; y < out.height; ++y) png_read_row(p, out.pixels.data() + static_cast<std::size_t>(y) * out.width * 4, nullptr);
    png_read_end(p, nullptr);
  }
  png_destroy_read_struct(&p, &info, nullptr);
  return out;
}

inline void write_file(const metrics::Image& im, const std::filesystem::path& path) {
  const auto bytes = encode(im);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace tvinr::png
