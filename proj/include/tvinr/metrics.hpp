// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "tvinr/common.hpp"

namespace tvinr::metrics {

/// 10*log10(1/mse); a zero error maps to +infinity.
inline double psnr_from_mse(double mse) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

inline double psnr(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ArgumentError("psnr: grids differ in size");
  if (a.empty()) throw ArgumentError("psnr: empty grids");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    se += d * d;
  }
  return psnr_from_mse(se / static_cast<double>(a.size()));
}

/// Float RGBA image, row-major from the top-left pixel.
struct Image {
  int width = 0, height = 0;
  std::vector<float> rgba;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgba(static_cast<std::size_t>(w) * h * 4, 0.0f) {}

  float* pixel(int x, int y) { return &rgba[(static_cast<std::size_t>(y) * width + x) * 4]; }
  const float* pixel(int x, int y) const { return &rgba[(static_cast<std::size_t>(y) * width + x) * 4]; }
  friend bool operator==(const Image&, const Image&) = default;
};

struct ImageQuality {
  double psnr = 0.0;
  double ssim = 0.0;
};

namespace detail {

inline std::array<double, 11> gaussian_window_1d() {
  std::array<double, 11> w{};
  double s = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    s += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= s;
  return w;
}

inline std::vector<double> luminance(const Image& im) {
  std::vector<double> y(static_cast<std::size_t>(im.width) * im.height);
  for (int j = 0; j < im.height; ++j)
    for (int i = 0; i < im.width; ++i) {
      const float* p = im.pixel(i, j);
      y[static_cast<std::size_t>(j) * im.width + i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
  return y;
}

}  // namespace detail

/// Single-scale SSIM on luminance: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Near the border the window is
/// truncated and renormalized; the result is the mean over all pixels.
inline double ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw ArgumentError("ssim: image sizes differ");
  const auto ya = detail::luminance(a), yb = detail::luminance(b);
  const auto w1 = detail::gaussian_window_1d();
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  const int W = a.width, H = a.height;
  double total = 0.0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double ws = 0, ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = -5; dy <= 5; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= H) continue;
        for (int dx = -5; dx <= 5; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= W) continue;
          const double w = w1[static_cast<std::size_t>(dy + 5)] * w1[static_cast<std::size_t>(dx + 5)];
          const double va = ya[static_cast<std::size_t>(yy) * W + xx], vb = yb[static_cast<std::size_t>(yy) * W + xx];
          ws += w;
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      }
      ma /= ws;
      mb /= ws;
      const double va = saa / ws - ma * ma, vb = sbb / ws - mb * mb, cov = sab / ws - ma * mb;
      total += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
    }
  return total / (static_cast<double>(W) * H);
}

inline ImageQuality image_psnr_ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw ArgumentError("image metrics: image sizes differ");
  double se = 0.0;
  for (std::size_t p = 0; p < a.rgba.size(); p += 4)
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(a.rgba[p + c]) - b.rgba[p + c];
      se += d * d;
    }
  const double mse = se / (3.0 * static_cast<double>(a.width) * a.height);
  return {psnr_from_mse(mse), ssim(a, b)};
}

}  // namespace tvinr::metrics
