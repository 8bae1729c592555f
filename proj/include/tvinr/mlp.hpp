// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tvinr/common.hpp"

namespace tvinr::nn {

struct MlpConfig {
  int hidden_layers = 2;
  int neurons_per_layer = 64;

  void validate() const {
    if (hidden_layers < 1) throw ArgumentError("MLP needs at least one hidden layer");
    if (neurons_per_layer < 1) throw ArgumentError("MLP needs at least one neuron per layer");
  }
};

/// Seeded splitmix64 source; independent of the standard library's
/// distribution implementations so parameter bytes are reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// Uniform in the open interval (-a, a).
  double symmetric(double a) {
    double u;
    do u = uniform();
    while (u == 0.0);
    return (2.0 * u - 1.0) * a;
  }
  std::uint64_t below(std::uint64_t n) { return next() % n; }

 private:
  std::uint64_t state_;
};

/// Fully connected network: ReLU hidden layers, one linear output. All
/// weights and biases live in one flat buffer; layer l stores a row-major
/// (out x in) weight block followed by its bias.
template <class Scalar>
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t input_dim, const MlpConfig& cfg) : input_dim_(input_dim), cfg_(cfg) {
    cfg.validate();
    if (input_dim == 0) throw ArgumentError("MLP input dimension must be positive");
    std::size_t in = input_dim;
    for (int l = 0; l <= cfg.hidden_layers; ++l) {
      const std::size_t out = l == cfg.hidden_layers ? 1 : static_cast<std::size_t>(cfg.neurons_per_layer);
      layers_.push_back({in, out, params_size_, params_size_ + in * out});
      params_size_ += in * out + out;
      in = out;
    }
    params_.assign(params_size_, Scalar(0));
  }

  struct Layer {
    std::size_t in, out;
    std::size_t weight_offset, bias_offset;
  };

  const MlpConfig& config() const { return cfg_; }
  std::size_t input_dim() const { return input_dim_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::span<Scalar> params() { return params_; }
  std::span<const Scalar> params() const { return params_; }

  /// Kaiming-uniform weights (bound sqrt(6/fan_in)) and biases in
  /// (-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void init(Rng& rng) {
    for (const auto& L : layers_) {
      const double wb = std::sqrt(6.0 / static_cast<double>(L.in));
      const double bb = 1.0 / std::sqrt(static_cast<double>(L.in));
      for (std::size_t i = 0; i < L.in * L.out; ++i) params_[L.weight_offset + i] = static_cast<Scalar>(rng.symmetric(wb));
      for (std::size_t i = 0; i < L.out; ++i) params_[L.bias_offset + i] = static_cast<Scalar>(rng.symmetric(bb));
    }
  }

  /// Scratch for one sample: pre-activations, ReLU outputs and deltas per layer.
  struct Trace {
    std::vector<std::vector<Scalar>> pre;
    std::vector<std::vector<Scalar>> act;
    std::vector<std::vector<Scalar>> delta;
  };

  Trace make_trace() const {
    Trace t;
    for (const auto& L : layers_) {
      t.pre.emplace_back(L.out);
      t.act.emplace_back(L.out);
      t.delta.emplace_back(L.out);
    }
    return t;
  }

  Scalar forward(std::span<const Scalar> x, Trace& tr) const {
    std::span<const Scalar> in = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& L = layers_[l];
      auto& z = tr.pre[l];
      const Scalar* W = &params_[L.weight_offset];
      for (std::size_t o = 0; o < L.out; ++o) {
        Scalar s = params_[L.bias_offset + o];
        const Scalar* row = W + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) s += row[i] * in[i];
        z[o] = s;
        tr.act[l][o] = relu(s);
      }
      in = tr.act[l];
    }
    return tr.pre.back()[0];
  }

  /// Accumulates d(out)/d(params) * dy into `grad` and writes d(out)/dx * dy
  /// into `dx`. Requires the trace of a preceding forward on the same x.
  void backward(std::span<const Scalar> x, Trace& tr, Scalar dy, std::span<Scalar> grad, std::span<Scalar> dx) const {
    const std::size_t n = layers_.size();
    tr.delta[n - 1][0] = dy;
    for (std::size_t l = n; l-- > 0;) {
      const auto& L = layers_[l];
      const Scalar* W = &params_[L.weight_offset];
      Scalar* gW = &grad[L.weight_offset];
      Scalar* gb = &grad[L.bias_offset];
      const auto& delta = tr.delta[l];
      for (std::size_t o = 0; o < L.out; ++o) {
        const Scalar d = delta[o];
        gb[o] += d;
        if (d == Scalar(0)) continue;
        Scalar* grow = gW + o * L.in;
        if (l == 0) {
          for (std::size_t i = 0; i < L.in; ++i) grow[i] += d * x[i];
        } else {
          const auto& a = tr.act[l - 1];
          for (std::size_t i = 0; i < L.in; ++i) grow[i] += d * a[i];
        }
      }
      // Propagate to the layer input.
      if (l == 0) {
        for (std::size_t i = 0; i < L.in; ++i) dx[i] = Scalar(0);
        for (std::size_t o = 0; o < L.out; ++o) {
          const Scalar d = delta[o];
          if (d == Scalar(0)) continue;
          const Scalar* row = W + o * L.in;
          for (std::size_t i = 0; i < L.in; ++i) dx[i] += row[i] * d;
        }
      } else {
        auto& prev = tr.delta[l - 1];
        const auto& a = tr.pre[l - 1];
        for (std::size_t i = 0; i < L.in; ++i) prev[i] = Scalar(0);
        for (std::size_t o = 0; o < L.out; ++o) {
          const Scalar d = delta[o];
          if (d == Scalar(0)) continue;
          const Scalar* row = W + o * L.in;
          for (std::size_t i = 0; i < L.in; ++i) prev[i] += row[i] * d;
        }
        for (std::size_t i = 0; i < L.in; ++i)
          if (!(a[i] > Scalar(0))) prev[i] = Scalar(0);
      }
    }
  }

  static Scalar relu(Scalar v) { return v > Scalar(0) ? v : Scalar(0); }

 private:
  std::size_t input_dim_ = 0;
  MlpConfig cfg_{};
  std::vector<Layer> layers_;
  std::size_t params_size_ = 0;
  std::vector<Scalar> params_;
};

}  // namespace tvinr::nn
