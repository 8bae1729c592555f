// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tvinr/common.hpp"
#include "tvinr/mlp.hpp"
#include "tvinr/tesseract.hpp"

namespace tvinr::nn {

/// Encoder followed by a shallow MLP producing one scalar per query.
template <class Encoder>
struct InrModel {
  using scalar_type = typename Encoder::scalar_type;

  Encoder encoder;
  Mlp<scalar_type> mlp;

  std::size_t param_count() const { return encoder.params().size() + mlp.params().size(); }
};

/// Embeddings ~ U(-1e-4, 1e-4), MLP by Kaiming-uniform fan-in scaling.
template <class Encoder>
InrModel<Encoder> init_model(Encoder encoder, const MlpConfig& cfg, std::uint64_t seed) {
  using S = typename Encoder::scalar_type;
  InrModel<Encoder> m{std::move(encoder), Mlp<S>()};
  m.mlp = Mlp<S>(m.encoder.output_dim(), cfg);
  Rng rng(seed);
  for (auto& p : m.encoder.params()) p = static_cast<S>(rng.symmetric(1e-4));
  m.mlp.init(rng);
  return m;
}

template <class Scalar>
Query4<double> to_query(const std::array<Scalar, 4>& c) {
  return {static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2]), static_cast<double>(c[3])};
}

/// Reusable per-thread scratch for forward and backward passes.
template <class Model>
struct Workspace {
  using S = typename Model::scalar_type;
  std::vector<S> encoded;
  std::vector<S> d_encoded;
  typename Mlp<S>::Trace trace;

  explicit Workspace(const Model& m)
      : encoded(m.encoder.output_dim()), d_encoded(m.encoder.output_dim()), trace(m.mlp.make_trace()) {}
};

template <class Model>
typename Model::scalar_type forward_one(const Model& m, const Query4<double>& q, Workspace<Model>& ws) {
  encoding::encode(m.encoder, q, std::span<typename Model::scalar_type>(ws.encoded));
  return m.mlp.forward(ws.encoded, ws.trace);
}

template <class Model>
typename Model::scalar_type forward_one(const Model& m, const Query4<double>& q) {
  Workspace<Model> ws(m);
  return forward_one(m, q, ws);
}

template <class Model, class Scalar>
std::vector<typename Model::scalar_type> forward(const Model& m, std::span<const std::array<Scalar, 4>> batch) {
  Workspace<Model> ws(m);
  std::vector<typename Model::scalar_type> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out[i] = forward_one(m, to_query(batch[i]), ws);
  return out;
}

/// Gradient of the batch loss. MLP gradients are dense; embedding gradients
/// are dense-backed but only `touched` indices may be non-zero.
template <class Scalar>
struct Gradients {
  std::vector<Scalar> mlp;
  std::vector<Scalar> embedding;
  std::vector<std::size_t> touched;
  std::vector<std::uint8_t> touched_flag;
  double loss = 0.0;

  template <class Model>
  explicit Gradients(const Model& m)
      : mlp(m.mlp.params().size()),
        embedding(m.encoder.params().size()),
        touched_flag(m.encoder.params().size(), 0) {}

  void clear() {
    std::fill(mlp.begin(), mlp.end(), Scalar(0));
    for (auto i : touched) {
      embedding[i] = Scalar(0);
      touched_flag[i] = 0;
    }
    touched.clear();
    loss = 0.0;
  }

  void add_embedding(std::size_t i, Scalar g) {
    if (!touched_flag[i]) {
      touched_flag[i] = 1;
      touched.push_back(i);
    }
    embedding[i] += g;
  }
};

/// MSE loss over the batch and its gradient. Per-sample contributions are
/// summed first and divided by the batch size once at the end.
template <class Model, class Scalar>
void backward(const Model& m, std::span<const std::array<Scalar, 4>> inputs, std::span<const Scalar> targets,
              Gradients<typename Model::scalar_type>& g, Workspace<Model>& ws) {
  using S = typename Model::scalar_type;
  if (inputs.size() != targets.size()) throw ArgumentError("backward: inputs and targets differ in length");
  if (inputs.empty()) throw ArgumentError("backward: empty batch");
  g.clear();
  double loss = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto q = to_query(inputs[i]);
    const S y = forward_one(m, q, ws);
    const S r = y - static_cast<S>(targets[i]);
    loss += static_cast<double>(r) * static_cast<double>(r);
    m.mlp.backward(ws.encoded, ws.trace, S(2) * r, g.mlp, ws.d_encoded);
    encoding::encode_gradients(m.encoder, q, std::span<const S>(ws.d_encoded),
                               [&](std::size_t idx, S v) { g.add_embedding(idx, v); });
  }
  const S inv = S(1) / static_cast<S>(inputs.size());
  for (auto& v : g.mlp) v *= inv;
  for (auto i : g.touched) g.embedding[i] *= inv;
  g.loss = loss / static_cast<double>(inputs.size());
}

template <class Model, class Scalar>
Gradients<typename Model::scalar_type> backward(const Model& m, std::span<const std::array<Scalar, 4>> inputs,
                                                std::span<const Scalar> targets) {
  Gradients<typename Model::scalar_type> g(m);
  Workspace<Model> ws(m);
  backward(m, inputs, targets, g, ws);
  return g;
}

template <class Model, class Scalar>
double mse_loss(const Model& m, std::span<const std::array<Scalar, 4>> inputs, std::span<const Scalar> targets) {
  Workspace<Model> ws(m);
  double loss = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const double r = static_cast<double>(forward_one(m, to_query(inputs[i]), ws)) - static_cast<double>(targets[i]);
    loss += r * r;
  }
  return loss / static_cast<double>(inputs.size());
}

}  // namespace tvinr::nn
