// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "tvinr/common.hpp"
#include "tvinr/feature_coreset.hpp"
#include "tvinr/metrics.hpp"
#include "tvinr/model.hpp"

namespace tvinr::nn {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = std::size_t{1} << 16;
  int max_epochs = 60;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  static constexpr std::size_t kPaperBatchSize = std::size_t{1} << 21;

  void validate() const {
    if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning_rate must be finite and >= 0");
    if (max_epochs < 0) throw ArgumentError("max_epochs must be >= 0");
  }
};

/// Adam with dense moments for the MLP and sparse updates for embeddings:
/// entries absent from a batch keep their value and moments untouched.
template <class Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t mlp_params, std::size_t embedding_params, const TrainConfig& cfg)
      : cfg_(cfg),
        m_mlp_(mlp_params),
        v_mlp_(mlp_params),
        m_emb_(embedding_params),
        v_emb_(embedding_params) {}

  std::int64_t steps() const { return step_; }

  template <class Model>
  void step(Model& model, const Gradients<Scalar>& g) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const Scalar lr = static_cast<Scalar>(cfg_.learning_rate / bc1);
    const Scalar b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
    const Scalar inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));
    const Scalar eps = static_cast<Scalar>(cfg_.epsilon);
    auto update = [&](Scalar& p, Scalar& m, Scalar& v, Scalar grad) {
      m = b1 * m + (Scalar(1) - b1) * grad;
      v = b2 * v + (Scalar(1) - b2) * grad * grad;
      p -= lr * m / (std::sqrt(v) * inv_sqrt_bc2 + eps);
    };
    auto mp = model.mlp.params();
    for (std::size_t i = 0; i < mp.size(); ++i) update(mp[i], m_mlp_[i], v_mlp_[i], g.mlp[i]);
    auto ep = model.encoder.params();
    for (const auto i : g.touched) update(ep[i], m_emb_[i], v_emb_[i], g.embedding[i]);
  }

 private:
  TrainConfig cfg_{};
  std::int64_t step_ = 0;
  std::vector<Scalar> m_mlp_, v_mlp_, m_emb_, v_emb_;
};

struct EpochReport {
  int epoch = 0;  // 1-based count of completed epochs
  double loss = 0.0;
  std::optional<double> psnr;
};

struct TrainResult {
  std::vector<EpochReport> trace;
  int epochs_run = 0;
};

/// Called after every epoch; returning false stops training.
using EpochCallback = std::function<bool(EpochReport&)>;

/// Epoch loop: seeded shuffle, mini-batches, sparse Adam. `first_epoch`
/// offsets the reported epoch numbers when resuming.
template <class Model>
TrainResult train(Model& model, const coreset::Coreset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {},
                  int first_epoch = 0) {
  using S = typename Model::scalar_type;
  cfg.validate();
  if (data.samples.empty()) throw ArgumentError("train: empty coreset");

  Adam<S> adam(model.mlp.params().size(), model.encoder.params().size(), cfg);
  Gradients<S> grads(model);
  Workspace<Model> ws(model);
  Rng rng(cfg.seed ^ 0x5eedf00dull);

  std::vector<std::size_t> order(data.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::array<float, 4>> inputs;
  std::vector<float> targets;
  TrainResult result;

  for (int e = 0; e < cfg.max_epochs; ++e) {
    // Fisher-Yates with the library RNG keeps shuffles identical across toolchains.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      inputs.clear();
      targets.clear();
      for (std::size_t i = start; i < end; ++i) {
        inputs.push_back(data.samples[order[i]].coords);
        targets.push_back(data.samples[order[i]].value);
      }
      backward(model, std::span<const std::array<float, 4>>(inputs), std::span<const float>(targets), grads, ws);
      if (!std::isfinite(grads.loss))
        throw DivergenceError("loss became non-finite in epoch " + std::to_string(first_epoch + e + 1),
                              first_epoch + e + 1);
      epoch_loss += grads.loss * static_cast<double>(end - start);
      adam.step(model, grads);
    }
    EpochReport rep{first_epoch + e + 1, epoch_loss / static_cast<double>(order.size()), std::nullopt};
    result.epochs_run = e + 1;
    const bool keep_going = on_epoch ? on_epoch(rep) : true;
    result.trace.push_back(rep);
    if (!keep_going) break;
  }
  return result;
}

/// PSNR of the model over coreset samples (peak 1).
template <class Model>
double coreset_psnr(const Model& model, const coreset::Coreset& data) {
  Workspace<Model> ws(model);
  double se = 0.0;
  for (const auto& s : data.samples) {
    const double r = static_cast<double>(forward_one(model, to_query(s.coords), ws)) - s.value;
    se += r * r;
  }
  return metrics::psnr_from_mse(se / static_cast<double>(data.samples.size()));
}

/// Evaluates the model on every volume vertex inside the FBB and fills the
/// rest of the frame with zero.
template <class Model>
std::vector<float> reconstruct_frame(const Model& model, double t, const Dims3& dims, const coreset::FeatureBoundingBox& fbb) {
  if (!(t >= -1.0 && t <= 1.0)) throw BoundsError("reconstruct_frame: time outside [-1, 1]");
  std::vector<float> out(static_cast<std::size_t>(dims.count()), 0.0f);
  Workspace<Model> ws(model);
  const auto& b = fbb.box;
  for (std::int64_t k = b.lo.z; k <= b.hi.z; ++k)
    for (std::int64_t j = b.lo.y; j <= b.hi.y; ++j)
      for (std::int64_t i = b.lo.x; i <= b.hi.x; ++i) {
        const Vec3d q = coreset::vertex_fbb_coords({i, j, k}, fbb);
        out[static_cast<std::size_t>(dims.linear(i, j, k))] =
            static_cast<float>(forward_one(model, Query4<double>{t, q.x, q.y, q.z}, ws));
      }
  return out;
}

}  // namespace tvinr::nn
