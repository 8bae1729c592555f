// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#include "tvinr/volume_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "test_util.hpp"

namespace tvinr::io {
namespace {

void write_raw(const std::filesystem::path& raw, const std::filesystem::path& meta, Dims3 dims, std::int64_t frames,
               const std::vector<float>& values) {
  std::ofstream o(raw, std::ios::binary);
  o.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 4));
  std::ofstream m(meta);
  m << nlohmann::json{{"dims", {dims.x, dims.y, dims.z}}, {"frames", frames}, {"dtype", "f32"}, {"value_min", 0}, {"value_max", 0}}.dump();
}

TEST(LoadVolume, ConstantFieldNormalizesToZero) {
  test::TempDir dir;
  write_raw(dir / "c.raw", dir / "c.json", {2, 2, 2}, 1, std::vector<float>(8, 5.0f));
  const auto vol = load_volume(dir / "c.raw", dir / "c.json");
  EXPECT_EQ(vol.meta.value_min, 5.0);
  EXPECT_EQ(vol.meta.value_max, 5.0);
  for (float v : vol.values) EXPECT_EQ(v, 0.0f);
}

TEST(LoadVolume, MinMaxEndpointsAndMidpoint) {
  test::TempDir dir;
  std::vector<float> vals(8, 4.0f);
  vals[0] = 2.0f;
  vals[7] = 6.0f;
  write_raw(dir / "r.raw", dir / "r.json", {2, 2, 2}, 1, vals);
  const auto vol = load_volume(dir / "r.raw", dir / "r.json");
  EXPECT_EQ(vol.values[0], 0.0f);
  EXPECT_EQ(vol.values[1], 0.5f);
  EXPECT_EQ(vol.values[7], 1.0f);

  std::vector<float> two(8, 0.0f);
  two[3] = 10.0f;
  write_raw(dir / "t.raw", dir / "t.json", {2, 2, 2}, 1, two);
  const auto v2 = load_volume(dir / "t.raw", dir / "t.json");
  EXPECT_EQ(v2.values[0], 0.0f);
  EXPECT_EQ(v2.values[3], 1.0f);
}

TEST(LoadVolume, NormalizationIsGlobalAcrossFrames) {
  test::TempDir dir;
  std::vector<float> vals(16, 1.0f);
  for (int i = 8; i < 16; ++i) vals[static_cast<std::size_t>(i)] = 3.0f;
  write_raw(dir / "g.raw", dir / "g.json", {2, 2, 2}, 2, vals);
  const auto vol = load_volume(dir / "g.raw", dir / "g.json");
  EXPECT_EQ(vol.frame(0)[0], 0.0f);
  EXPECT_EQ(vol.frame(1)[0], 1.0f);
}

TEST(LoadVolume, SizeMismatchIsFormatError) {
  test::TempDir dir;
  write_raw(dir / "s.raw", dir / "s.json", {2, 2, 2}, 2, std::vector<float>(8, 1.0f));
  EXPECT_THROW(load_volume(dir / "s.raw", dir / "s.json"), FormatError);
}

TEST(LoadVolume, NonFiniteIsDataError) {
  test::TempDir dir;
  std::vector<float> vals(8, 1.0f);
  vals[2] = std::numeric_limits<float>::quiet_NaN();
  write_raw(dir / "n.raw", dir / "n.json", {2, 2, 2}, 1, vals);
  EXPECT_THROW(load_volume(dir / "n.raw", dir / "n.json"), DataError);
}

TEST(LoadVolume, WriteRoundTripIsBitExact) {
  test::TempDir dir;
  std::mt19937 gen(7);
  std::uniform_real_distribution<float> u(-1e6f, 1e6f);
  std::vector<float> vals(3 * 4 * 5 * 2);
  for (auto& v : vals) v = u(gen);
  vals[5] = -0.0f;
  vals[6] = std::numeric_limits<float>::denorm_min();
  write_raw(dir / "a.raw", dir / "a.json", {3, 4, 5}, 2, vals);
  const auto vol = load_volume(dir / "a.raw", dir / "a.json");
  write_volume(vol, dir / "b.raw", dir / "b.json");
  EXPECT_EQ(test::read_bytes(dir / "a.raw"), test::read_bytes(dir / "b.raw"));
  const auto again = load_volume(dir / "b.raw", dir / "b.json");
  EXPECT_EQ(again.values, vol.values);
}

TEST(NormalizeCoords, CornersAndInterior) {
  const Dims3 d3{3, 3, 3};
  EXPECT_EQ(normalize_coords({0, 0, 0}, d3), (Vec3d{-1, -1, -1}));
  EXPECT_EQ(normalize_coords({2, 2, 2}, d3), (Vec3d{1, 1, 1}));
  EXPECT_EQ(normalize_coords({1, 0, 2}, Dims3{3, 5, 5}), (Vec3d{0.0, -1.0, 0.0}));
  EXPECT_THROW(normalize_coords({3, 0, 0}, d3), BoundsError);
  EXPECT_THROW(normalize_coords({0, -1, 0}, d3), BoundsError);
}

TEST(NormalizeCoords, StrictlyMonotoneAndAttainsEndpoints) {
  for (std::int64_t n = 2; n < 40; ++n) {
    const Dims3 d{n, 2, 2};
    double prev = -2.0;
    for (std::int64_t k = 0; k < n; ++k) {
      const double v = normalize_coords({k, 0, 0}, d).x;
      EXPECT_GT(v, prev);
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
      prev = v;
    }
    EXPECT_EQ(normalize_coords({0, 0, 0}, d).x, -1.0);
    EXPECT_EQ(normalize_coords({n - 1, 0, 0}, d).x, 1.0);
  }
}

Volume4D frames_from(const std::vector<float>& per_frame_value, Dims3 dims = {2, 2, 2}) {
  Volume4D v;
  v.meta = {dims, static_cast<std::int64_t>(per_frame_value.size()), 0, 1, "t"};
  for (float f : per_frame_value) v.values.insert(v.values.end(), static_cast<std::size_t>(dims.count()), f);
  return v;
}

TEST(SelectKeyFrames, EndpointsAlwaysKept) {
  const auto v = frames_from({0.3f, 0.3f, 0.3f, 0.3f, 0.3f});
  EXPECT_EQ(select_key_frames(v, 2).indices, (std::vector<std::int64_t>{0, 4}));
}

TEST(SelectKeyFrames, BudgetEqualToFrameCountTakesAll) {
  const auto v = frames_from({0.1f, 0.1f, 0.9f});
  EXPECT_EQ(select_key_frames(v, 3).indices, (std::vector<std::int64_t>{0, 1, 2}));
  const auto w = frames_from({0.1f, 0.1f, 0.9f});
  EXPECT_EQ(select_key_frames(w, 2).indices, (std::vector<std::int64_t>{0, 2}));
}

TEST(SelectKeyFrames, FarthestFrameChosenWithLowIndexTies) {
  // Distances to {0, 5}: frame 2 (value 0.5) is farthest from both endpoints.
  const auto v = frames_from({0.0f, 0.1f, 0.5f, 0.5f, 0.9f, 1.0f});
  EXPECT_EQ(select_key_frames(v, 3).indices, (std::vector<std::int64_t>{0, 2, 5}));
}

TEST(SelectKeyFrames, DeterministicAndValidated) {
  const auto v = frames_from({0.0f, 0.2f, 0.7f, 0.1f, 0.9f, 0.4f, 1.0f});
  const auto a = select_key_frames(v, 4);
  const auto b = select_key_frames(v, 4);
  EXPECT_EQ(a.indices, b.indices);
  EXPECT_NO_THROW(a.validate(7));
  EXPECT_THROW(select_key_frames(v, 1), ArgumentError);
  EXPECT_THROW(select_key_frames(v, 8), ArgumentError);
}

TEST(SynthMovingGaussian, InfiniteSigmaIsAllOnes) {
  const auto v = synth_moving_gaussian({8, 8, 8}, 2, {{-0.5, 0, 0}, {0.5, 0, 0}, std::numeric_limits<double>::infinity()});
  for (float x : v.values) EXPECT_EQ(x, 1.0f);
}

TEST(SynthMovingGaussian, PeakOnGridPointIsOne) {
  // Vertex 4 of 9 sits at 0 in normalized coordinates.
  const auto v = synth_moving_gaussian({9, 9, 9}, 2, {{0, 0, 0}, {0, 0, 0}, 0.2});
  EXPECT_EQ(v.at(0, 4, 4, 4), 1.0f);
  EXPECT_LT(v.at(0, 0, 0, 0), 1.0f);
}

TEST(SynthMovingGaussian, ArgmaxAdvancesAlongTrajectory) {
  const auto v = synth_moving_gaussian({16, 16, 16}, 4, {{-0.6, 0, 0}, {0.6, 0, 0}, 0.2});
  std::int64_t prev = -1;
  for (std::int64_t t = 0; t < 4; ++t) {
    const auto f = v.frame(t);
    const auto arg = std::max_element(f.begin(), f.end()) - f.begin();
    const std::int64_t x = arg % 16;
    EXPECT_GT(x, prev);
    prev = x;
  }
  for (float x : v.values) {
    EXPECT_GE(x, 0.0f);
    EXPECT_LE(x, 1.0f);
  }
}

TEST(SynthMovingGaussian, ArgumentValidation) {
  EXPECT_THROW(synth_moving_gaussian({4, 8, 8}, 2, {}), ArgumentError);
  EXPECT_THROW(synth_moving_gaussian({8, 8, 8}, 1, {}), ArgumentError);
}

}  // namespace
}  // namespace tvinr::io
