// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#include "tvinr/renderer.hpp"

#include <gtest/gtest.h>

#include <random>

#include "tvinr/checkpoint.hpp"
#include "tvinr/png.hpp"
#include "tvinr/train.hpp"

namespace tvinr::render {
namespace {

using coreset::OccupancyGrid;

TEST(ArmPace, Examples) {
  EXPECT_EQ(arm_pace(1000, 1000), 1);
  EXPECT_EQ(arm_pace(1000, 10), 64);
  EXPECT_EQ(arm_pace(1000, 100), 10);
  EXPECT_EQ(arm_pace(10, 1000), 1);
  EXPECT_THROW(arm_pace(10, 0), ArgumentError);
  for (std::int64_t na = 1; na < 3000; na += 7) {
    const auto p = arm_pace(1000, na);
    EXPECT_GE(p, 1);
    EXPECT_LE(p, 64);
  }
}

TEST(GetRays, LookingAwayIsAllDead) {
  Camera cam;
  cam.eye = {0, 0, 4};
  cam.target = {0, 0, 8};
  cam.width = cam.height = 8;
  for (const auto& r : get_rays(cam)) EXPECT_FALSE(r.alive);
  const auto img = render(GridField({2, 2, 2}, std::vector<float>(8, 1.0f)), 0.0, cam, TransferFunction(), ArmConfig{}, nullptr);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      EXPECT_EQ(img.image.pixel(x, y)[0], 0.0f);
      EXPECT_EQ(img.image.pixel(x, y)[3], 1.0f);
    }
  EXPECT_EQ(img.stats.samples, 0);
}

TEST(GetRays, TwoByTwoIsSymmetricAboutViewAxis) {
  Camera cam;
  cam.width = cam.height = 2;
  cam.fov_deg = 90;
  const auto rays = get_rays(cam);
  ASSERT_EQ(rays.size(), 4u);
  // tan(45 deg) = 1, pixel centres at +-0.5: directions normalize(+-0.5, +-0.5, -1).
  const double n = std::sqrt(1.5);
  const Vec3d expect[4] = {{-0.5 / n, 0.5 / n, -1 / n}, {0.5 / n, 0.5 / n, -1 / n}, {-0.5 / n, -0.5 / n, -1 / n}, {0.5 / n, -0.5 / n, -1 / n}};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(rays[static_cast<std::size_t>(i)].dir.x, expect[i].x, 1e-12);
    EXPECT_NEAR(rays[static_cast<std::size_t>(i)].dir.y, expect[i].y, 1e-12);
    EXPECT_NEAR(rays[static_cast<std::size_t>(i)].dir.z, expect[i].z, 1e-12);
    // At z = 1 these reach |x| = |y| = 1.5, outside the box.
    EXPECT_FALSE(rays[static_cast<std::size_t>(i)].alive);
  }
  Camera odd;
  odd.width = odd.height = 3;
  const auto c = get_rays(odd)[4];
  EXPECT_NEAR(c.dir.x, 0.0, 1e-15);
  EXPECT_NEAR(c.dir.y, 0.0, 1e-15);
  EXPECT_NEAR(c.t_enter, 3.0, 1e-12);
  EXPECT_NEAR(c.t_exit, 5.0, 1e-12);
}

TEST(GetRays, DegenerateCameraRejected) {
  Camera cam;
  cam.up = {0, 0, 1};
  EXPECT_THROW(get_rays(cam), ArgumentError);
  cam = Camera{};
  cam.target = cam.eye;
  EXPECT_THROW(get_rays(cam), ArgumentError);
  cam = Camera{};
  cam.fov_deg = 180;
  EXPECT_THROW(get_rays(cam), ArgumentError);
}

RayState axis_ray() {
  RayState r;
  r.origin = {-3.0, 0.05, 0.05};
  r.dir = {1, 0, 0};
  intersect_unit_box(r.origin, r.dir, r.t_enter, r.t_exit);
  r.alive = true;
  return r;
}

TEST(NextSamples, EmptyAndFullOccupancy) {
  const OccupancyGrid empty({8, 8, 8});
  auto r = axis_ray();
  std::vector<Vec3d> out;
  EXPECT_EQ(next_samples(r, 10, &empty, 0.1, 1000, out), 0);
  EXPECT_FALSE(r.alive);
  OccupancyGrid full({8, 8, 8});
  for (std::int64_t k = 0; k < 8; ++k)
    for (std::int64_t j = 0; j < 8; ++j)
      for (std::int64_t i = 0; i < 8; ++i) full.set(i, j, k);
  r = axis_ray();
  EXPECT_EQ(next_samples(r, 5, &full, 0.1, 1000, out), 5);
  EXPECT_TRUE(r.alive);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(out[i].x, -1.0 + 0.1 * static_cast<double>(i), 1e-12);
}

TEST(NextSamples, GapIsSkippedAndMatchesFilteredMarch) {
  std::mt19937 gen(3);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 40; ++trial) {
    OccupancyGrid occ({8, 8, 8});
    for (std::int64_t k = 0; k < 8; ++k)
      for (std::int64_t j = 0; j < 8; ++j)
        for (std::int64_t i = 0; i < 8; ++i) occ.set(i, j, k, coin(gen));
    std::uniform_real_distribution<double> u(-1, 1);
    RayState r;
    r.origin = {3 * u(gen), 3 * u(gen), 4.0};
    r.dir = normalized(Vec3d{0.3 * u(gen), 0.3 * u(gen), -1.0});
    if (!intersect_unit_box(r.origin, r.dir, r.t_enter, r.t_exit)) continue;
    r.alive = true;
    const double step = 0.013;
    RayState plain = r;
    std::vector<Vec3d> skipped, all;
    while (r.alive) next_samples(r, 7, &occ, step, 100000, skipped);
    while (plain.alive) next_samples(plain, 7, nullptr, step, 100000, all);
    std::vector<Vec3d> filtered;
    for (const auto& p : all)
      if (occ.occupied_at(p)) filtered.push_back(p);
    ASSERT_EQ(skipped.size(), filtered.size()) << trial;
    for (std::size_t i = 0; i < skipped.size(); ++i) ASSERT_EQ(skipped[i], filtered[i]);
  }
}

TEST(NextSamples, RespectsPerRayCap) {
  auto r = axis_ray();
  std::vector<Vec3d> out;
  EXPECT_EQ(next_samples(r, 100, nullptr, 0.01, 30, out), 30);
  EXPECT_FALSE(r.alive);
}

// Random field that is zero on every vertex outside `region`, and the
// occupancy built from that region.
struct Scene {
  Dims3 dims{12, 12, 12};
  std::vector<float> values;
  OccupancyGrid occ;
};

Scene random_scene(std::uint32_t seed) {
  Scene s;
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> u(0.2f, 1.0f);
  s.values.assign(static_cast<std::size_t>(s.dims.count()), 0.0f);
  coreset::VertexSet region;
  for (std::int64_t k = 3; k < 9; ++k)
    for (std::int64_t j = 2; j < 10; ++j)
      for (std::int64_t i = 4; i < 8; ++i)
        if ((i + j + k) % 3 != 0) {
          s.values[static_cast<std::size_t>(s.dims.linear(i, j, k))] = u(gen);
          region.push_back(s.dims.linear(i, j, k));
        }
  std::sort(region.begin(), region.end());
  s.occ = coreset::build_occupancy(region, s.dims);
  return s;
}

Camera oblique(int w = 24, int h = 20) {
  Camera cam;
  cam.eye = {2.5, 1.5, 3.0};
  cam.width = w;
  cam.height = h;
  return cam;
}

TEST(Render, TransparentTfGivesBackground) {
  const auto s = random_scene(1);
  ArmConfig arm;
  arm.background = {0.2f, 0.3f, 0.4f, 1.0f};
  const auto r = render(GridField(s.dims, s.values), 0.0, oblique(), TransferFunction({{0, 1, 1, 1, 0}, {1, 1, 1, 1, 0}}), arm, &s.occ);
  for (std::size_t i = 0; i < r.image.rgba.size(); i += 4) {
    EXPECT_FLOAT_EQ(r.image.rgba[i], 0.2f);
    EXPECT_FLOAT_EQ(r.image.rgba[i + 2], 0.4f);
  }
}

TEST(Render, ArmMatchesFixedPaceBitForBit) {
  const auto s = random_scene(2);
  const GridField f(s.dims, s.values);
  const auto& tf = builtin_transfer_function("hot");
  ArmConfig fixed;
  fixed.adaptive = false;
  ArmConfig arm;
  const auto a = render(f, 0.0, oblique(), tf, arm, &s.occ);
  const auto b = render(f, 0.0, oblique(), tf, fixed, &s.occ);
  EXPECT_EQ(a.image, b.image);
  EXPECT_LE(a.stats.iterations, b.stats.iterations);
  EXPECT_LE(a.stats.samples, b.stats.samples + a.stats.wasted);
  EXPECT_EQ(b.stats.wasted, 0);
  // Other pace settings only change batching.
  for (std::int64_t cap : {2, 7, 200}) {
    ArmConfig other;
    other.pace_cap = cap;
    other.budget = 333;
    EXPECT_EQ(render(f, 0.0, oblique(), tf, other, &s.occ).image, a.image) << cap;
  }
}

TEST(Render, ThreadCountDoesNotChangePixels) {
  const auto s = random_scene(8);
  const GridField f(s.dims, s.values);
  ArmConfig one, many;
  many.threads = 4;
  const auto a = render(f, 0.0, oblique(64, 64), builtin_transfer_function("hot"), one, &s.occ);
  const auto b = render(f, 0.0, oblique(64, 64), builtin_transfer_function("hot"), many, &s.occ);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.stats.samples, b.stats.samples);
}

TEST(Render, ArmScheduleIsMonotone) {
  const auto s = random_scene(3);
  const auto r = render(GridField(s.dims, s.values), 0.0, oblique(32, 32), builtin_transfer_function("hot"), ArmConfig{}, &s.occ);
  const auto& na = r.stats.alive_per_iteration;
  const auto& ns = r.stats.pace_per_iteration;
  ASSERT_GT(na.size(), 1u);
  for (std::size_t i = 1; i < na.size(); ++i) {
    EXPECT_LE(na[i], na[i - 1]);
    EXPECT_GE(ns[i], ns[i - 1]);
  }
}

TEST(Render, SkippingIsConservative) {
  for (std::uint32_t seed : {4u, 5u, 6u}) {
    const auto s = random_scene(seed);
    const GridField f(s.dims, s.values);
    const auto& tf = builtin_transfer_function("cool-warm");
    ArmConfig on, off;
    off.skip_empty = false;
    const auto a = render(f, 0.0, oblique(), tf, on, &s.occ);
    const auto b = render(f, 0.0, oblique(), tf, off, &s.occ);
    for (std::size_t i = 0; i < a.image.rgba.size(); ++i) EXPECT_NEAR(a.image.rgba[i], b.image.rgba[i], 1e-6f);
    EXPECT_LT(a.stats.samples, b.stats.samples);
  }
}

TEST(Render, CompositedAlphaStaysInUnitRange) {
  const auto s = random_scene(7);
  ArmConfig arm;
  arm.background = {0, 0, 0, 0};
  const auto r = render(GridField(s.dims, s.values), 0.0, oblique(), builtin_transfer_function("grayscale"), arm, &s.occ);
  for (std::size_t i = 3; i < r.image.rgba.size(); i += 4) {
    EXPECT_GE(r.image.rgba[i], 0.0f);
    EXPECT_LE(r.image.rgba[i], 1.0f);
  }
}

TEST(Render, OpaqueTfShowsOccupancySilhouette) {
  // Occupied cells form the box [-0.5, 0.5] x [-0.25, 0.75] x [-1, 1].
  OccupancyGrid occ({8, 8, 8});
  for (std::int64_t k = 0; k < 8; ++k)
    for (std::int64_t j = 3; j < 7; ++j)
      for (std::int64_t i = 2; i < 6; ++i) occ.set(i, j, k);
  const GridField f({2, 2, 2}, std::vector<float>(8, 1.0f));
  const TransferFunction white({{0, 1, 1, 1, 1}, {1, 1, 1, 1, 1}});
  Camera cam;
  cam.eye = {0.2, 0.1, 4};
  cam.target = {0.2, 0.1, 0};
  cam.width = cam.height = 40;
  const auto r = render(f, 0.0, cam, white, ArmConfig{}, &occ);
  const auto rays = get_rays(cam);
  int checked = 0;
  for (const auto& ray : rays) {
    // The ray is inside the prism for all z iff its x/y at z = +-1 are inside.
    auto inside = [&](double z, double margin) {
      const double t = (z - ray.origin.z) / ray.dir.z;
      const Vec3d p = ray.at(t);
      return p.x > -0.5 + margin && p.x < 0.5 - margin && p.y > -0.25 + margin && p.y < 0.75 - margin;
    };
    const bool hit = inside(1.0, 0.02) && inside(-1.0, 0.02);
    const bool miss = !inside(1.0, -0.02) && !inside(-1.0, -0.02);
    const float v = r.image.pixel(ray.pixel % cam.width, ray.pixel / cam.width)[0];
    if (hit) {
      EXPECT_EQ(v, 1.0f);
      ++checked;
    } else if (miss) {
      EXPECT_EQ(v, 0.0f);
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(Render, NonFiniteValueNamesPixel) {
  struct NanField {
    void eval(double, std::span<const Vec3d>, std::span<float> out) const {
      for (auto& v : out) v = std::numeric_limits<float>::quiet_NaN();
    }
  };
  Camera cam;
  cam.width = cam.height = 4;
  try {
    render(NanField{}, 0.0, cam, TransferFunction(), ArmConfig{}, nullptr);
    FAIL();
  } catch (const RenderError& e) {
    EXPECT_NE(std::string(e.what()).find("pixel ("), std::string::npos);
  }
  EXPECT_THROW(render(NanField{}, 1.5, cam, TransferFunction(), ArmConfig{}, nullptr), BoundsError);
}

TEST(TransferFunction, InterpolationAndValidation) {
  const TransferFunction tf({{0, 0, 0, 0, 0}, {0.5, 1, 0, 0, 0.5f}, {1, 1, 1, 1, 1}});
  EXPECT_FLOAT_EQ(tf(0.25)[0], 0.5f);
  EXPECT_FLOAT_EQ(tf(0.25)[3], 0.25f);
  EXPECT_FLOAT_EQ(tf(0.75)[1], 0.5f);
  EXPECT_FLOAT_EQ(tf(2.0)[3], 1.0f);
  const auto back = TransferFunction::from_json(tf.to_json());
  EXPECT_FLOAT_EQ(back(0.75)[1], 0.5f);
  EXPECT_THROW(TransferFunction({{0.1, 0, 0, 0, 0}, {1, 1, 1, 1, 1}}), ArgumentError);
  EXPECT_THROW(TransferFunction({{0, 0, 0, 0, 0}, {0.7, 0, 0, 0, 0}, {0.5, 0, 0, 0, 0}, {1, 1, 1, 1, 1}}), ArgumentError);
  EXPECT_THROW(builtin_transfer_function("nope"), ArgumentError);
  try {
    builtin_transfer_function("nope");
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("grayscale"), std::string::npos);
  }
  for (const auto& t : builtin_transfer_functions()) EXPECT_EQ(t.tf(0.0)[3], 0.0f) << t.id;
}

TEST(Png, RoundTripsPixels) {
  metrics::Image im(5, 3);
  for (std::size_t i = 0; i < im.rgba.size(); ++i) im.rgba[i] = static_cast<float>(i % 7) / 6.0f;
  const auto bytes = png::encode(im);
  EXPECT_EQ(bytes, png::encode(im));
  const auto back = png::decode(bytes);
  ASSERT_EQ(back.width, 5);
  ASSERT_EQ(back.height, 3);
  EXPECT_EQ(back.pixels, png::to_rgba8(im));
  auto cut = bytes;
  cut.resize(cut.size() / 2);
  EXPECT_THROW(png::decode(cut), FormatError);
}

struct TrainedBlob {
  io::Volume4D vol;
  coreset::CoresetResult cs;
  nn::FloatModel model;
};

const TrainedBlob& trained_blob() {
  static const TrainedBlob blob = [] {
    TrainedBlob b;
    b.vol = io::synth_moving_gaussian({24, 24, 24}, 3, {{-0.5, 0, 0}, {0.5, 0, 0}, 0.3});
    b.cs = coreset::build_coreset(b.vol, {{0, 1, 2}}, coreset::FeatureSpec::segmentation(0.5));
    b.model = nn::init_model(encoding::TesseractEncoder<float>::from_fbb(b.cs.fbb.sizes(), b.cs.key_times, 2, 2), {}, 1);
    nn::TrainConfig cfg;
    cfg.batch_size = 512;
    cfg.max_epochs = 30;
    nn::train(b.model, b.cs.coreset, cfg);
    return b;
  }();
  return blob;
}

double centroid_x(const metrics::Image& im) {
  double sw = 0, sx = 0;
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x) {
      const double a = im.pixel(x, y)[3];
      sw += a;
      sx += a * x;
    }
  return sx / sw;
}

TEST(SuperResolution, KeyTimeMatchesPlainRenderAndMidpointIsBetween) {
  const auto& b = trained_blob();
  const ModelField<nn::FloatModel> field(b.model, b.cs.fbb);
  Camera cam;
  cam.width = cam.height = 32;
  ArmConfig arm;
  arm.background = {0, 0, 0, 0};
  const auto& tf = builtin_transfer_function("feature");
  const auto plain = render(field, 0.0, cam, tf, arm, &b.cs.occupancy[1]);
  const auto sup = render_supersampled_time(field, 0.0, std::span<const OccupancyGrid>(b.cs.occupancy), cam, tf, arm);
  EXPECT_EQ(plain.image, sup.image);

  const double c0 = centroid_x(render_supersampled_time(field, -1.0, std::span<const OccupancyGrid>(b.cs.occupancy), cam, tf, arm).image);
  const double cm = centroid_x(render_supersampled_time(field, -0.5, std::span<const OccupancyGrid>(b.cs.occupancy), cam, tf, arm).image);
  const double c1 = centroid_x(plain.image);
  EXPECT_LT(c0, cm);
  EXPECT_LT(cm, c1);
  EXPECT_THROW(occupancy_at(std::span<const OccupancyGrid>(b.cs.occupancy), 1.5), BoundsError);
}

TEST(ModelFieldRender, FbbOccupancySkipIsExact) {
  const auto& b = trained_blob();
  const ModelField<nn::FloatModel> field(b.model, b.cs.fbb);
  const auto occ = fbb_occupancy(b.cs.fbb);
  Camera cam = oblique(24, 24);
  TransferFunction tf({{0, 0, 0, 0, 0}, {1e-6, 0.1f, 0.2f, 0.3f, 0.05f}, {1, 1, 0.8f, 0.6f, 0.9f}});
  ArmConfig on, off;
  off.skip_empty = false;
  const auto a = render(field, 0.3, cam, tf, on, &occ);
  const auto c = render(field, 0.3, cam, tf, off, &occ);
  for (std::size_t i = 0; i < a.image.rgba.size(); ++i) ASSERT_NEAR(a.image.rgba[i], c.image.rgba[i], 1e-6f);
  EXPECT_LT(a.stats.samples, c.stats.samples);
}

}  // namespace
}  // namespace tvinr::render
