// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dacg/checkpoint.hpp"
#include "dacg/cli.hpp"
#include "dacg/degrade.hpp"
#include "dacg/image.hpp"

using namespace dacg;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const char* name) {
  const fs::path d = fs::temp_directory_path() / "dacg_test_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

std::vector<std::vector<std::string>> rows(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::istringstream cs(line);
    std::string cell;
    while (std::getline(cs, cell, '\t')) cells.push_back(cell);
    out.push_back(cells);
  }
  return out;
}

std::vector<double> losses(const std::string& jsonl) {
  std::vector<double> out;
  std::istringstream lines(jsonl);
  std::string line;
  while (std::getline(lines, line)) out.push_back(nlohmann::json::parse(line)["loss"].get<double>());
  return out;
}

}  // namespace

TEST_CASE("help") {
  for (const char* sub : {"train", "restore", "grad-check", "ablate", "metrics", "make-data"}) {
    CAPTURE(sub);
    const auto r = cli({sub, "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--") != std::string::npos);
  }
  const auto train = cli({"train", "--help"}).out;
  for (const char* flag : {"--size", "--task", "--sigma", "--steps", "--out", "--lr0", "--config", "--seed"}) {
    CHECK(train.find(flag) != std::string::npos);
  }
  CHECK(train.find("500") != std::string::npos);
  CHECK(train.find("0.0002") != std::string::npos);
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"train", "--out", "x", "--bogus"}).code == kExitConfig);
}

TEST_CASE("train") {
  SUBCASE("missing --out") {
    const auto r = cli({"train", "--steps", "2"});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("--out") != std::string::npos);
    CHECK(r.err.find("Options:") != std::string::npos);
  }
  SUBCASE("writes report and checkpoint") {
    const fs::path d = scratch("train");
    const auto r = cli({"train", "--steps", "3", "--pairs", "4", "--eval-pairs", "2", "--out", d.string()});
    REQUIRE(r.code == 0);
    CHECK(losses(r.out).size() == 3);
    CHECK(slurp(d / "report.jsonl") == r.out);
    CHECK(fs::exists(d / "final.json"));
    CHECK(fs::exists(d / "final.bin"));
    const auto summary = nlohmann::json::parse(slurp(d / "summary.json"));
    CHECK(summary["eval"]["pairs"] == 2);
    CHECK(load_checkpoint(d / "final").state["step"] == 3);
  }
  SUBCASE("lr0 0 gives a flat curve") {
    const auto r = cli({"train", "--steps", "4", "--pairs", "1", "--lr0", "0", "--eval-pairs", "0", "--out",
                        scratch("flat").string()});
    REQUIRE(r.code == 0);
    const auto l = losses(r.out);
    REQUIRE(l.size() == 4);
    for (double v : l) CHECK(v == l[0]);
  }
  SUBCASE("config precedence") {
    const fs::path d = scratch("config");
    std::ofstream(d / "c.json") << R"({"train": {"steps": 2, "batch": 1}, "data": {"pairs": 2, "eval_pairs": 0}})";
    const auto from_file = cli({"train", "--config", (d / "c.json").string(), "--out", (d / "a").string()});
    REQUIRE(from_file.code == 0);
    CHECK(losses(from_file.out).size() == 2);
    const auto resolved = nlohmann::json::parse(slurp(d / "a" / "config.json"));
    CHECK(resolved["train"]["batch"] == 1);
    CHECK(resolved["train"]["lr0"] == 2e-4);
    const auto flag_wins =
        cli({"train", "--config", (d / "c.json").string(), "--steps", "3", "--out", (d / "b").string()});
    CHECK(losses(flag_wins.out).size() == 3);
  }
  SUBCASE("config errors") {
    const fs::path d = scratch("badconfig");
    std::ofstream(d / "key.json") << "{\"train\": {\"steps\": 2,\n \"bogus\": 1}}";
    std::ofstream(d / "syntax.json") << "{\"train\": {\"steps\": 2,\n \"lr0\": }}";
    std::ofstream(d / "top.json") << "{\"trian\": {}}";
    const auto key = cli({"train", "--config", (d / "key.json").string(), "--out", (d / "o").string()});
    CHECK(key.code == kExitConfig);
    CHECK(key.err.find("bogus") != std::string::npos);
    const auto syntax = cli({"train", "--config", (d / "syntax.json").string(), "--out", (d / "o").string()});
    CHECK(syntax.code == kExitConfig);
    CHECK(syntax.err.find("syntax.json:2:") != std::string::npos);
    CHECK(cli({"train", "--config", (d / "top.json").string(), "--out", (d / "o").string()}).code == kExitConfig);
    CHECK(cli({"train", "--config", (d / "missing.json").string(), "--out", (d / "o").string()}).code ==
          kExitConfig);
    CHECK(cli({"train", "--size", "huge", "--out", (d / "o").string()}).code == kExitConfig);
  }
  SUBCASE("data and numerical errors") {
    const fs::path d = scratch("errors");
    CHECK(cli({"train", "--data", (d / "none").string(), "--out", (d / "o").string()}).code == kExitData);
    const auto nan = cli({"train", "--steps", "5", "--lr0", "1e12", "--pairs", "4", "--out", (d / "n").string()});
    CHECK(nan.code == kExitNumerical);
    CHECK(nan.err.find("non-finite") != std::string::npos);
  }
}

TEST_CASE("restore") {
  const fs::path d = scratch("restore");
  Model<float> m(ModelConfig::preset("tiny"));
  m.zero_output_projections();
  save_checkpoint(d / "zero", make_checkpoint(m));

  ImageBuffer odd = procedural_image(37, 53, 4);
  save_ppm(d / "odd.ppm", odd);
  const auto r = cli({"restore", "--checkpoint", (d / "zero.json").string(), "--input", (d / "odd.ppm").string(),
                      "--output", (d / "out.ppm").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(d / "out.ppm") == slurp(d / "odd.ppm"));

  Model<float> trained(ModelConfig::preset("tiny"));
  save_checkpoint(d / "live", make_checkpoint(trained));
  const ImageBuffer ref = procedural_image(37, 53, 5);
  save_ppm(d / "ref.ppm", ref);
  const auto scored = cli({"restore", "--checkpoint", (d / "live.bin").string(), "--input",
                           (d / "odd.ppm").string(), "--output", (d / "live.ppm").string(), "--reference",
                           (d / "ref.ppm").string()});
  REQUIRE(scored.code == 0);
  const ImageBuffer out = load_ppm(d / "live.ppm");
  CHECK(out.height == 37);
  CHECK(out.width == 53);
  const auto line = rows(scored.out).at(1);
  CHECK(std::stod(line.at(2)) == doctest::Approx(psnr(out, load_ppm(d / "ref.ppm"))).epsilon(1e-9));
  const auto metrics = cli({"metrics", "--clean", (d / "live.ppm").string(), "--restored", (d / "ref.ppm").string()});
  CHECK(rows(metrics.out).at(1).at(1) == line.at(2));
  CHECK(rows(metrics.out).at(1).at(2) == line.at(3));

  const auto mismatch = cli({"restore", "--checkpoint", (d / "live").string(), "--input", (d / "odd.ppm").string(),
                             "--output", (d / "x.ppm").string(), "--size", "small"});
  CHECK(mismatch.code == kExitConfig);
  CHECK(mismatch.err.find("stem.weight") != std::string::npos);

  save_ppm(d / "small.ppm", procedural_image(8, 8, 1));
  CHECK(cli({"restore", "--checkpoint", (d / "live").string(), "--input", (d / "odd.ppm").string(), "--output",
             (d / "y.ppm").string(), "--reference", (d / "small.ppm").string()})
            .code == kExitConfig);
  CHECK(cli({"restore", "--checkpoint", (d / "nothing").string(), "--input", (d / "odd.ppm").string(), "--output",
             (d / "z.ppm").string()})
            .code == kExitData);
}

TEST_CASE("grad-check") {
  const auto caga = cli({"grad-check", "--only", "caga", "--seeds", "1"});
  CHECK(caga.code == 0);
  const auto table = rows(caga.out);
  REQUIRE(table.size() == 2);
  CHECK(table[1][1] == "caga");
  CHECK(table[1][5] == "ok");

  const auto prims = cli({"grad-check", "--only", "primitives", "--seeds", "2"});
  CHECK(prims.code == 0);
  CHECK(rows(prims.out).size() > 20);

  const auto fault = cli({"grad-check", "--only", "sigmoid", "--inject-fault", "sigmoid"});
  CHECK(fault.code == kExitGradCheck);
  CHECK(fault.err.find("sigmoid") != std::string::npos);
  // The fault does not outlive the command.
  CHECK(cli({"grad-check", "--only", "sigmoid"}).code == 0);

  CHECK(cli({"grad-check", "--only", "nothing"}).code == kExitConfig);
}

TEST_CASE("ablate dry run") {
  const auto r = cli({"ablate", "--dry-run"});
  REQUIRE(r.code == 0);
  const auto table = rows(r.out);
  REQUIRE(table.size() == 12);
  CHECK(table[0] == std::vector<std::string>{"variant", "params", "description"});
  std::set<std::string> labels;
  std::map<std::string, long> params;
  for (std::size_t i = 1; i < table.size(); ++i) {
    labels.insert(table[i][0]);
    params[table[i][0]] = std::stol(table[i][1]);
  }
  CHECK(labels == std::set<std::string>{"V(a)", "V(b)", "V(c)", "V(d)", "V(e)", "V(f)", "V(full)", "VI-baseline",
                                        "VI-T", "VI-G", "VI-CAGA"});
  for (const char* single : {"V(a)", "V(b)", "V(c)"}) CHECK(params["V(full)"] >= params[single]);
}

TEST_CASE("make-data and metrics") {
  const fs::path d = scratch("data");
  const std::vector<std::string> haze{"make-data", "--task", "haze", "--t", "0.6", "--airlight", "0.9",
                                      "--count", "8", "--seed", "1"};
  auto a = haze, b = haze;
  a.insert(a.end(), {"--out", (d / "a").string()});
  b.insert(b.end(), {"--out", (d / "b").string()});
  REQUIRE(cli(a).code == 0);
  REQUIRE(cli(b).code == 0);
  const auto tagged = fs::directory_iterator(d / "a" / "degraded")->path().filename();
  CHECK(list_ppm(d / "a" / "clean").size() == 8);
  CHECK(list_ppm(d / "a" / "degraded" / tagged).size() == 8);
  for (const auto& p : list_ppm(d / "a" / "degraded" / tagged)) {
    CHECK(slurp(p) == slurp(d / "b" / "degraded" / tagged / p.filename()));
  }
  const auto spec = degradation_spec_from_json(nlohmann::json::parse(slurp(d / "a" / "degraded" / tagged / "spec.json")));
  CHECK(spec.kind == DegradationKind::haze);
  CHECK(spec_tag(spec) == tagged.string());

  const auto same = cli({"metrics", "--clean", (d / "a" / "clean").string(), "--restored", (d / "b" / "clean").string()});
  REQUIRE(same.code == 0);
  for (const auto& row : rows(same.out)) {
    if (row[0] == "file") continue;
    CHECK(std::stod(row[1]) == 100.0);
    CHECK(std::stod(row[2]) == 1.0);
  }

  REQUIRE(cli({"make-data", "--sigma", "25", "--count", "8", "--size", "64", "--seed", "3", "--out",
               (d / "noise").string()})
              .code == 0);
  const auto noise_dir = fs::directory_iterator(d / "noise" / "degraded")->path();
  const auto noisy = cli({"metrics", "--clean", (d / "noise" / "clean").string(), "--restored", noise_dir.string()});
  REQUIRE(noisy.code == 0);
  const auto mean = rows(noisy.out).back();
  CHECK(mean[0] == "mean");
  CHECK(std::stod(mean[1]) == doctest::Approx(20.2).epsilon(0.5 / 20.2));

  fs::copy_file(d / "a" / "clean" / "0000.ppm", d / "a" / "clean" / "extra.ppm");
  const auto orphan =
      cli({"metrics", "--clean", (d / "a" / "clean").string(), "--restored", (d / "b" / "clean").string()});
  CHECK(orphan.code == kExitData);
  CHECK(orphan.err.find("extra.ppm") != std::string::npos);
}
