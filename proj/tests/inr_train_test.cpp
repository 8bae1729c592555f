// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <set>

#include "test_util.hpp"
#include "tvinr/checkpoint.hpp"
#include "tvinr/train.hpp"

namespace tvinr::nn {
namespace {

using encoding::LevelConfig;
using encoding::TesseractEncoder;
using DModel = InrModel<TesseractEncoder<double>>;
using Coords = std::array<double, 4>;

TesseractEncoder<double> tiny_encoder(std::int64_t F = 2) {
  return TesseractEncoder<double>({{1, 3, 4, 3, 2}, {2, 2, 2, 2, 2}}, 2, F, {-1.0, 0.0, 1.0});
}

TEST(InitModel, DeterministicAndInRange) {
  const auto a = init_model(tiny_encoder(), {2, 8}, 42);
  const auto b = init_model(tiny_encoder(), {2, 8}, 42);
  const auto c = init_model(tiny_encoder(), {2, 8}, 43);
  EXPECT_TRUE(std::equal(a.encoder.params().begin(), a.encoder.params().end(), b.encoder.params().begin()));
  EXPECT_TRUE(std::equal(a.mlp.params().begin(), a.mlp.params().end(), b.mlp.params().begin()));
  EXPECT_FALSE(std::equal(a.mlp.params().begin(), a.mlp.params().end(), c.mlp.params().begin()));
  for (double p : a.encoder.params()) {
    EXPECT_GT(p, -1e-4);
    EXPECT_LT(p, 1e-4);
  }
  for (const auto& L : a.mlp.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(L.in));
    for (std::size_t i = 0; i < L.in * L.out; ++i) EXPECT_LE(std::abs(a.mlp.params()[L.weight_offset + i]), bound);
  }
}

TEST(Forward, ZeroModelIsZero) {
  auto m = init_model(tiny_encoder(), {2, 8}, 1);
  for (auto& p : m.encoder.params()) p = 0;
  for (auto& p : m.mlp.params()) p = 0;
  std::mt19937 gen(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(forward_one(m, Query4<double>{u(gen), u(gen), u(gen), u(gen)}), 0.0);
}

TEST(Forward, PassThroughOfOneEncodingComponent) {
  auto m = init_model(tiny_encoder(), {1, 1}, 1);
  for (auto& p : m.encoder.params()) p = std::abs(p) * 1000 + 0.25;  // positive so ReLU passes it
  for (auto& p : m.mlp.params()) p = 0;
  const auto& L0 = m.mlp.layers()[0];
  const auto& L1 = m.mlp.layers()[1];
  m.mlp.params()[L0.weight_offset + 3] = 1.0;  // component 3 -> hidden
  m.mlp.params()[L1.weight_offset] = 1.0;
  const Query4<double> q{0.3, -0.2, 0.6, 0.1};
  EXPECT_NEAR(forward_one(m, q), encoding::encode(m.encoder, q)[3], 1e-15);
}

// Naive matrix evaluation of the same network.
double naive_forward(const DModel& m, const Query4<double>& q) {
  std::vector<double> h = encoding::encode(m.encoder, q);
  const auto& layers = m.mlp.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    std::vector<double> next(L.out);
    for (std::size_t o = 0; o < L.out; ++o) {
      double s = m.mlp.params()[L.bias_offset + o];
      for (std::size_t i = 0; i < L.in; ++i) s += m.mlp.params()[L.weight_offset + o * L.in + i] * h[i];
      next[o] = l + 1 == layers.size() ? s : std::max(0.0, s);
    }
    h = std::move(next);
  }
  return h[0];
}

TEST(Forward, MatchesNaiveOracle) {
  auto m = init_model(tiny_encoder(), {2, 8}, 7);
  Rng rng(3);
  for (auto& p : m.encoder.params()) p = rng.symmetric(1.0);
  const std::vector<Coords> batch{{-1, -1, -1, -1}, {1, 1, 1, 1}, {0, 0, 0, 0}, {0.5, -0.25, 0.75, 0.1}, {-0.3, 0.9, -0.6, 0.2}};
  const auto out = forward(m, std::span<const Coords>(batch));
  for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_NEAR(out[i], naive_forward(m, to_query(batch[i])), 1e-12);
}

TEST(Backward, ExactTargetsGiveZeroLossAndGradient) {
  const auto m = init_model(tiny_encoder(), {2, 8}, 5);
  const std::vector<Coords> batch{{0.1, 0.2, 0.3, 0.4}, {-0.5, 0.5, -0.5, 0.5}};
  const auto y = forward(m, std::span<const Coords>(batch));
  const auto g = backward(m, std::span<const Coords>(batch), std::span<const double>(y));
  EXPECT_EQ(g.loss, 0.0);
  for (double v : g.mlp) EXPECT_EQ(v, 0.0);
  for (double v : g.embedding) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(backward(m, std::span<const Coords>(batch), std::span<const double>(y.data(), 1)), ArgumentError);
}

// Relative error of every analytic gradient against central differences.
double max_gradient_error(DModel& m, const std::vector<Coords>& batch, const std::vector<double>& targets) {
  const auto g = backward(m, std::span<const Coords>(batch), std::span<const double>(targets));
  double worst = 0.0;
  auto check = [&](std::span<double> params, auto analytic) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double h = 1e-6, p0 = params[k];
      params[k] = p0 + h;
      const double lp = mse_loss(m, std::span<const Coords>(batch), std::span<const double>(targets));
      params[k] = p0 - h;
      const double lm = mse_loss(m, std::span<const Coords>(batch), std::span<const double>(targets));
      params[k] = p0;
      const double num = (lp - lm) / (2 * h), a = analytic(k);
      worst = std::max(worst, std::abs(num - a) / std::max({std::abs(num), std::abs(a), 1e-4}));
    }
  };
  check(m.mlp.params(), [&](std::size_t k) { return g.mlp[k]; });
  check(m.encoder.params(), [&](std::size_t k) { return g.embedding[k]; });
  return worst;
}

TEST(Backward, MatchesFiniteDifferencesOnTinyModels) {
  std::mt19937 gen(21);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = init_model(tiny_encoder(1 + trial % 2), {1 + trial % 2, 4 + trial % 5}, static_cast<std::uint64_t>(trial));
    Rng rng(static_cast<std::uint64_t>(trial) + 100);
    for (auto& p : m.encoder.params()) p = rng.symmetric(1.0);
    std::vector<Coords> batch(3);
    std::vector<double> targets(3);
    for (std::size_t i = 0; i < 3; ++i) {
      batch[i] = {u(gen), u(gen), u(gen), u(gen)};
      targets[i] = u(gen);
    }
    EXPECT_LT(max_gradient_error(m, batch, targets), 1e-5) << "trial " << trial;
  }
}

TEST(Backward, DuplicatedSampleDoublesItsContribution) {
  const auto m = init_model(tiny_encoder(), {2, 8}, 9);
  const Coords a{0.1, 0.3, -0.7, 0.2}, b{-0.6, -0.1, 0.4, 0.9};
  auto grad = [&](std::vector<Coords> batch, std::vector<double> targets) {
    auto g = backward(m, std::span<const Coords>(batch), std::span<const double>(targets));
    std::vector<double> e(g.embedding);
    for (auto& v : e) v *= static_cast<double>(batch.size());  // undo the averaging
    return e;
  };
  const auto ga = grad({a}, {0.5}), gb = grad({b}, {0.25}), gaba = grad({a, b, a}, {0.5, 0.25, 0.5});
  for (std::size_t k = 0; k < ga.size(); ++k) EXPECT_NEAR(gaba[k], 2 * ga[k] + gb[k], 1e-12);
}

coreset::Coreset grid_coreset(double (*f)(double, double, double, double), int n = 6, double t_lo = -1.0) {
  coreset::Coreset c;
  for (double t : {t_lo, 0.0, 1.0})
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const double X = -1 + 2.0 * x / (n - 1), Y = -1 + 2.0 * y / (n - 1), Z = -1 + 2.0 * z / (n - 1);
          c.samples.push_back({{static_cast<float>(t), static_cast<float>(X), static_cast<float>(Y), static_cast<float>(Z)},
                               static_cast<float>(f(t, X, Y, Z))});
        }
  return c;
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  auto m = init_model(tiny_encoder(), {2, 8}, 3);
  const auto before_e = std::vector<double>(m.encoder.params().begin(), m.encoder.params().end());
  const auto before_m = std::vector<double>(m.mlp.params().begin(), m.mlp.params().end());
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 32;
  cfg.max_epochs = 3;
  train(m, grid_coreset([](double, double x, double, double) { return 0.5 + 0.4 * x; }), cfg);
  EXPECT_TRUE(std::equal(before_e.begin(), before_e.end(), m.encoder.params().begin()));
  EXPECT_TRUE(std::equal(before_m.begin(), before_m.end(), m.mlp.params().begin()));
}

TEST(Train, ConstantCoresetConvergesWithinTenEpochs) {
  auto m = init_model(TesseractEncoder<float>({{1, 2, 2, 2, 2}}, 2, 2, {-1.0, 1.0}), {1, 8}, 11);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 10;
  const auto r = train(m, grid_coreset([](double, double, double, double) { return 0.7; }), cfg);
  ASSERT_EQ(r.epochs_run, 10);
  EXPECT_LT(r.trace.back().loss, 1e-6);
}

TEST(Train, MovingGaussianSmoothedLossDecreases) {
  const auto vol = io::synth_moving_gaussian({16, 16, 16}, 4, {{-0.5, 0, 0}, {0.5, 0, 0}, 0.3});
  const auto cs = coreset::build_coreset(vol, {{0, 3}}, coreset::FeatureSpec::segmentation(0.5));
  auto m = init_model(TesseractEncoder<float>::from_fbb(cs.fbb.sizes(), cs.key_times, 2, 2), {}, 1);
  TrainConfig cfg;
  cfg.max_epochs = 10;
  const auto r = train(m, cs.coreset, cfg);
  ASSERT_EQ(r.trace.size(), 10u);
  // Full-batch Adam oscillates over a few epochs, so smooth with the running mean.
  double sum = 0.0, prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    sum += r.trace[i].loss;
    const double smooth = sum / static_cast<double>(i + 1);
    EXPECT_LT(smooth, prev) << "epoch " << i + 1;
    prev = smooth;
  }
  EXPECT_LT(r.trace.back().loss, r.trace.front().loss);
}

TEST(Train, SeededRunsAreBitIdentical) {
  auto run = [] {
    auto m = init_model(tiny_encoder(), {2, 8}, 4);
    TrainConfig cfg;
    cfg.batch_size = 20;
    cfg.max_epochs = 3;
    cfg.seed = 77;
    std::vector<double> losses;
    for (const auto& e : train(m, grid_coreset([](double t, double x, double y, double) { return 0.3 * t + x * y; }), cfg).trace)
      losses.push_back(e.loss);
    return losses;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
}

TEST(Train, CallbackCanStopEarly) {
  auto m = init_model(tiny_encoder(), {1, 4}, 4);
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.max_epochs = 50;
  const auto r = train(m, grid_coreset([](double, double, double, double) { return 0.2; }), cfg,
                       [](EpochReport& e) { return e.epoch < 4; });
  EXPECT_EQ(r.epochs_run, 4);
}

TEST(Train, SparseAdamLeavesUntouchedEntriesExactlyAlone) {
  auto m = init_model(TesseractEncoder<double>({{1, 2, 9, 9, 9}}, 2, 2, {-1.0, 1.0}), {1, 8}, 6);
  coreset::Coreset c;
  for (int i = 0; i < 40; ++i) {
    const float x = -1.0f + 0.01f * static_cast<float>(i);
    c.samples.push_back({{-1.0f, x, -0.9f, -0.95f}, 0.5f});
  }
  std::set<std::size_t> touched;
  for (const auto& s : c.samples)
    m.encoder.for_each_corner(to_query(s.coords), [&](std::size_t, std::int64_t e, double) {
      for (std::size_t f = 0; f < 2; ++f) touched.insert(static_cast<std::size_t>(e) * 2 + f);
    });
  const std::vector<double> before(m.encoder.params().begin(), m.encoder.params().end());
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 5;
  train(m, c, cfg);
  int changed = 0;
  for (std::size_t k = 0; k < before.size(); ++k) {
    if (touched.count(k))
      changed += m.encoder.params()[k] != before[k];
    else
      ASSERT_EQ(m.encoder.params()[k], before[k]) << k;
  }
  EXPECT_GT(changed, 0);
  EXPECT_LT(touched.size(), before.size());
}

TEST(Train, NonFiniteLossNamesEpoch) {
  auto m = init_model(tiny_encoder(), {1, 4}, 4);
  auto c = grid_coreset([](double, double, double, double) { return 0.2; });
  c.samples[5].value = std::numeric_limits<float>::quiet_NaN();
  TrainConfig cfg;
  cfg.batch_size = 1000;
  try {
    train(m, c, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1);
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
  EXPECT_THROW(train(m, coreset::Coreset{}, cfg), ArgumentError);
}

TEST(Psnr, ClosedForms) {
  EXPECT_TRUE(std::isinf(metrics::psnr_from_mse(0.0)));
  EXPECT_NEAR(metrics::psnr_from_mse(0.01), 20.0, 1e-12);
  EXPECT_NEAR(metrics::psnr_from_mse(1e-4), 40.0, 1e-12);
  const std::vector<float> a{0.0f, 0.5f, 1.0f, 0.25f}, b{0.1f, 0.4f, 0.9f, 0.35f};
  EXPECT_TRUE(std::isinf(metrics::psnr(a, a)));
  EXPECT_NEAR(metrics::psnr(a, b), 20.0, 1e-5);
  EXPECT_THROW(metrics::psnr(a, std::vector<float>(3)), ArgumentError);
}

TEST(ReconstructFrame, ZeroModelAndContinuityInTime) {
  const auto vol = io::synth_moving_gaussian({10, 10, 10}, 3, {{-0.4, 0, 0}, {0.4, 0, 0}, 0.3});
  const auto cs = coreset::build_coreset(vol, {{0, 1, 2}}, coreset::FeatureSpec::segmentation(0.5));
  auto m = init_model(TesseractEncoder<float>::from_fbb(cs.fbb.sizes(), cs.key_times, 2, 2), {2, 16}, 2);
  Rng rng(9);
  for (auto& p : m.encoder.params()) p = static_cast<float>(rng.symmetric(1.0));
  auto l2 = [](const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  const auto base = reconstruct_frame(m, 0.0, vol.meta.dims, cs.fbb);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double d = l2(base, reconstruct_frame(m, eps, vol.meta.dims, cs.fbb));
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, 1e-2);
  EXPECT_THROW(reconstruct_frame(m, 1.5, vol.meta.dims, cs.fbb), BoundsError);

  for (auto& p : m.encoder.params()) p = 0;
  for (auto& p : m.mlp.params()) p = 0;
  for (float v : reconstruct_frame(m, 0.3, vol.meta.dims, cs.fbb)) EXPECT_EQ(v, 0.0f);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  test::TempDir dir;
  auto m = init_model(TesseractEncoder<float>({{1, 3, 4, 3, 2}, {2, 2, 2, 2, 2}}, 2, 2, {-1.0, 0.0, 1.0}), {2, 8}, 12);
  CheckpointMeta meta;
  meta.epoch = 7;
  meta.loss_history = {0.5, 0.1, 1.0 / 3.0};
  meta.dataset_hash = "abc";
  meta.fbb = coreset::FeatureBoundingBox{{{1, 2, 3}, {4, 5, 6}}, {10, 10, 10}};
  meta.occupancy_files = {"occ_000.bin", "occ_001.bin"};
  save_checkpoint(m, meta, dir / "a.ckpt");
  const auto ck = load_checkpoint(dir / "a.ckpt");
  save_checkpoint(ck.model, ck.meta, dir / "b.ckpt");
  EXPECT_EQ(test::read_bytes(dir / "a.ckpt"), test::read_bytes(dir / "b.ckpt"));
  EXPECT_EQ(ck.meta.epoch, 7);
  EXPECT_EQ(ck.meta.loss_history, meta.loss_history);
  EXPECT_EQ(ck.meta.fbb->box, meta.fbb->box);
  const std::vector<std::array<float, 4>> probes{{0, 0, 0, 0}, {0.5f, -0.5f, 0.25f, 1}, {-1, 1, -1, 1}};
  const auto a = forward(m, std::span<const std::array<float, 4>>(probes));
  const auto b = forward(ck.model, std::span<const std::array<float, 4>>(probes));
  EXPECT_EQ(a, b);
}

TEST(Checkpoint, CorruptFilesAreFormatErrors) {
  test::TempDir dir;
  const auto m = init_model(TesseractEncoder<float>({{1, 2, 2, 2, 2}}, 2, 1, {-1.0, 1.0}), {1, 4}, 1);
  save_checkpoint(m, {}, dir / "c.ckpt");
  auto bytes = test::read_bytes(dir / "c.ckpt");
  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() - 3}) {
    std::ofstream(dir / "t.ckpt", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(cut));
    try {
      load_checkpoint(dir / "t.ckpt");
      FAIL() << "truncated at " << cut;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
    }
  }
  bytes[8] = 9;  // version
  std::ofstream(dir / "v.ckpt", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  EXPECT_THROW(load_checkpoint(dir / "v.ckpt"), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), FormatError);
}

TEST(ImageMetrics, ClosedFormsAndCheckerboard) {
  metrics::Image a(16, 12), b(16, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x) {
      const float v = 0.2f + 0.5f * static_cast<float>((x * 7 + y * 3) % 11) / 11.0f;
      for (int c = 0; c < 3; ++c) {
        a.pixel(x, y)[c] = v;
        b.pixel(x, y)[c] = v + 0.1f;
      }
      a.pixel(x, y)[3] = b.pixel(x, y)[3] = 1.0f;
    }
  const auto same = metrics::image_psnr_ssim(a, a);
  EXPECT_TRUE(std::isinf(same.psnr));
  EXPECT_NEAR(same.ssim, 1.0, 1e-12);
  EXPECT_NEAR(metrics::image_psnr_ssim(a, b).psnr, 20.0, 1e-4);

  metrics::Image c(16, 16), d(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        c.pixel(x, y)[ch] = static_cast<float>((x + y) % 2);
        d.pixel(x, y)[ch] = static_cast<float>((x + y + 1) % 2);
      }
  EXPECT_LT(metrics::ssim(c, d), -0.95);
  EXPECT_THROW(metrics::ssim(a, c), ArgumentError);
}

}  // namespace
}  // namespace tvinr::nn
