// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>

#include "dacg/checkpoint.hpp"
#include "test_util.hpp"

using namespace dacg;
using dacg::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "dacg_test_checkpoint";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("checkpoint base path") {
  CHECK(checkpoint_base("a/b.json") == fs::path("a/b"));
  CHECK(checkpoint_base("a/b.bin") == fs::path("a/b"));
  CHECK(checkpoint_base("a/b") == fs::path("a/b"));
}

TEST_CASE("payload layout") {
  Checkpoint c;
  c.config = ModelConfig::preset("tiny");
  c.tensors.push_back({"a", Shape{1, 1, 1, 2}, {1.0f, -2.5f}});
  c.tensors.push_back({"b", Shape{1, 1, 1, 1}, {0.15625f}});
  const fs::path base = scratch("layout");
  save_checkpoint(base, c);
  const std::string bin = slurp(base.string() + ".bin");
  REQUIRE(bin.size() == 12);
  // 1.0f = 0x3f800000, little-endian.
  CHECK(static_cast<unsigned char>(bin[2]) == 0x80);
  CHECK(static_cast<unsigned char>(bin[3]) == 0x3f);
  const auto m = nlohmann::json::parse(slurp(base.string() + ".json"));
  CHECK(m["schema_version"] == 1);
  CHECK(m["tensors"][1]["offset"] == 8);
  CHECK(m["tensors"][0]["dtype"] == "f32-le");
  CHECK(m["payload_bytes"] == 12);

  const Checkpoint back = load_checkpoint(base.string() + ".json");
  CHECK(back.config == c.config);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0].values == c.tensors[0].values);
  CHECK(back.find("b")->values[0] == 0.15625f);
}

TEST_CASE("save load forward is bit identical") {
  ModelConfig cfg = ModelConfig::preset("tiny");
  cfg.seed = 5;
  const Model<float> m(cfg);
  const fs::path base = scratch("model");
  save_checkpoint(base, make_checkpoint(m, {{"step", 3}}));
  const Model<float> back = load_model<float>(base);
  CHECK(back.config() == cfg);
  const auto x = random_tensor<float>(Shape{1, 3, 16, 16}, 1, 0.0, 1.0);
  CHECK(m(x).values() == back(x).values());

  // Same weights produce byte-identical files.
  const fs::path again = scratch("model_again");
  save_checkpoint(again, make_checkpoint(back, {{"step", 3}}));
  CHECK(slurp(base.string() + ".bin") == slurp(again.string() + ".bin"));
  CHECK(slurp(base.string() + ".json") != "");
}

TEST_CASE("incompatible checkpoints are named") {
  const Model<float> m(ModelConfig::preset("tiny"));
  Checkpoint c = make_checkpoint(m);

  Model<float> target(ModelConfig::preset("tiny"));
  Checkpoint missing = c;
  missing.tensors.erase(missing.tensors.begin() + 2);
  const std::string lost = c.tensors[2].name;
  CHECK_THROWS_WITH_AS(restore_tensors(target.params(), missing), doctest::Contains(lost.c_str()), ConfigError);

  Checkpoint reshaped = c;
  reshaped.tensors[0].shape = Shape{1, 1, 1, static_cast<int>(reshaped.tensors[0].shape.numel())};
  CHECK_THROWS_WITH_AS(restore_tensors(target.params(), reshaped), doctest::Contains(c.tensors[0].name.c_str()), ConfigError);

  Checkpoint extra = c;
  extra.tensors.push_back({"ghost.weight", Shape{1, 1, 1, 1}, {0.0f}});
  CHECK_THROWS_WITH_AS(restore_tensors(target.params(), extra), doctest::Contains("ghost.weight"), ConfigError);
  extra.tensors.back().name = "adam.m/ghost";
  CHECK_NOTHROW(restore_tensors(target.params(), extra));

  ModelConfig wider = ModelConfig::preset("tiny");
  wider.base_channels = 16;
  Model<float> other(wider);
  CHECK_THROWS_AS(restore_tensors(other.params(), c), ConfigError);
}

TEST_CASE("corrupt files are data errors") {
  const Model<float> m(ModelConfig::preset("tiny"));
  const fs::path base = scratch("corrupt");
  save_checkpoint(base, make_checkpoint(m));
  {
    std::ofstream f(base.string() + ".bin", std::ios::binary | std::ios::app);
    f << "xx";
  }
  CHECK_THROWS_AS(load_checkpoint(base), DataError);
  {
    std::ofstream f(base.string() + ".json");
    f << "{ not json";
  }
  CHECK_THROWS_AS(load_checkpoint(base), DataError);
  CHECK_THROWS_AS(load_checkpoint(scratch("nope")), DataError);
}
