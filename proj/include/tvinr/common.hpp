// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tvinr {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI and the HTTP service.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error("format", w) {}
};
struct DataError : Error {
  explicit DataError(const std::string& w) : Error("data", w) {}
};
struct BoundsError : Error {
  explicit BoundsError(const std::string& w) : Error("bounds", w) {}
};
struct ArgumentError : Error {
  explicit ArgumentError(const std::string& w) : Error("argument", w) {}
};
struct FeatureNotFoundError : Error {
  explicit FeatureNotFoundError(const std::string& w) : Error("feature-not-found", w) {}
};
struct DivergenceError : Error {
  DivergenceError(const std::string& w, int epoch) : Error("divergence", w), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};
struct RenderError : Error {
  explicit RenderError(const std::string& w) : Error("render", w) {}
};

/// Integer voxel/vertex dimensions, X fastest.
struct Dims3 {
  std::int64_t x = 0, y = 0, z = 0;

  std::int64_t count() const { return x * y * z; }
  std::int64_t linear(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return i + x * (j + y * k);
  }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

struct Index3 {
  std::int64_t x = 0, y = 0, z = 0;
  friend bool operator==(const Index3&, const Index3&) = default;
};

template <class T>
struct Vec3 {
  T x{}, y{}, z{};

  constexpr T& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }
  constexpr const T& operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator*(Vec3 a, T s) { return {a.x * s, a.y * s, a.z * s}; }
  friend constexpr Vec3 operator*(T s, Vec3 a) { return a * s; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

using Vec3d = Vec3<double>;

template <class T>
constexpr T dot(Vec3<T> a, Vec3<T> b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
template <class T>
constexpr Vec3<T> cross(Vec3<T> a, Vec3<T> b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
template <class T>
T length(Vec3<T> a) {
  return std::sqrt(dot(a, a));
}
template <class T>
Vec3<T> normalized(Vec3<T> a) {
  const T n = length(a);
  return {a.x / n, a.y / n, a.z / n};
}

/// A spatiotemporal query (t, x, y, z), each component normally in [-1, 1].
template <class T>
struct Query4 {
  T t{}, x{}, y{}, z{};
};

/// Maps vertex index k on an axis of `size` vertices to -1 + 2k/(size-1).
inline double vertex_to_unit(std::int64_t k, std::int64_t size) {
  return -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(size - 1);
}

}  // namespace tvinr
