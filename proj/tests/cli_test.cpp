// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include <json.hpp>

#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Run {
  int code;
  std::string out, err;
};

Run run(const tvinr::test::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(TVINR_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, tvinr::test::read_text(out), tvinr::test::read_text(err)};
}

json last_error(const Run& r) {
  const auto line = r.err.substr(r.err.rfind('{'));
  return json::parse(line);
}

TEST(Cli, ExtractTrainRenderRoundTrip) {
  tvinr::test::TempDir dir;
  const auto o = (dir / "run").string();
  const std::string common = " --out-dir " + o;
  auto r = run(dir, "--seed 5 extract --synthetic moving_gaussian --set dataset.dims=[16,16,16] --set dataset.frames=3 "
                    "--key-frames 3" + common);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::is_regular_file(dir / "run/manifest.json"));

  r = run(dir, "--seed 5 train --epochs 2 --batch-size 256 --set mlp.neurons_per_layer=16" + common);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto loss = tvinr::test::read_text(dir / "run/loss.csv");
  EXPECT_EQ(std::count(loss.begin(), loss.end(), '\n'), 3);

  r = run(dir, "train --resume --epochs 1 --batch-size 256 --set mlp.neurons_per_layer=16" + common);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("(epoch 3)"), std::string::npos) << r.out;

  r = run(dir, "render --times=-1:1:1 --width 16 --height 16 --tf cool-warm --out " + o + "/f.png" + common);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"f_000.png", "f_001.png", "f_002.png"}) EXPECT_TRUE(fs::is_regular_file(dir / "run" / f)) << f;

  r = run(dir, "render --t 2 --out " + o + "/g.png" + common);
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(last_error(r)["error"], "argument");
  EXPECT_NE(r.err.find("--extrapolate"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "run/g.png"));

  r = run(dir, "render --t 2 --extrapolate --width 16 --height 16 --out " + o + "/g.png" + common);
  EXPECT_EQ(r.code, 0) << r.err;

  r = run(dir, "render --tf nope" + common);
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(last_error(r)["field"], "render.transfer_function");
}

TEST(Cli, ErrorsAreMachineReadable) {
  tvinr::test::TempDir dir;
  auto r = run(dir, "extract --volume " + (dir / "missing.raw").string() + " --out-dir " + (dir / "o").string());
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(last_error(r)["error"], "argument");
  EXPECT_NE(last_error(r)["message"].get<std::string>().find("missing.raw"), std::string::npos);

  r = run(dir, "train --set train.bogus=1 --out-dir " + (dir / "o").string());
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(last_error(r)["field"], "train.bogus");

  r = run(dir, "extract --synthetic moving_gaussian --set feature={\\\"kind\\\":\\\"segmentation\\\",\\\"threshold\\\":9} --out-dir " +
                   (dir / "o").string());
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(last_error(r)["error"], "feature-not-found");

  r = run(dir, "frobnicate");
  EXPECT_NE(r.code, 0);
}

}  // namespace
