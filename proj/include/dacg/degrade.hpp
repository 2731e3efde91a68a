// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacg/image.hpp"

namespace dacg {

enum class DegradationKind { gaussian_noise, rain_streak, haze, lowlight, composite };

struct RainParams {
  int num_streaks = 40;
  double length_px = 12.0;
  double angle_deg = 75.0;  // from the horizontal
  double intensity = 0.6;
};

struct HazeParams {
  double transmission = 0.6;  // t in (0, 1]
  double airlight = 0.9;      // A in [0, 1]
};

struct LowlightParams {
  double gamma = 2.0;  // > 1
  double gain = 0.5;   // in (0, 1)
};

struct DegradationSpec {
  DegradationKind kind = DegradationKind::gaussian_noise;
  double sigma = 25.0;  // 8-bit units
  RainParams rain;
  HazeParams haze;
  LowlightParams lowlight;
  std::vector<DegradationSpec> parts;  // composite only, applied in order
  std::uint64_t seed = 0;

  static DegradationSpec gaussian(double sigma, std::uint64_t seed = 0);
  static DegradationSpec hazy(double t, double airlight);
  void validate() const;
};

std::string to_string(DegradationKind kind);
DegradationKind degradation_kind_from_string(const std::string& name);

nlohmann::json to_json(const DegradationSpec& spec);
DegradationSpec degradation_spec_from_json(const nlohmann::json& j);
/// Short stable identifier (16 hex digits) of the spec, used for directory names.
std::string spec_tag(const DegradationSpec& spec);

/// Deterministic given spec.seed. Composite part i runs with seed
/// Rng::mix(spec.seed, i); the parts' own seeds are ignored.
ImageBuffer degrade(const ImageBuffer& clean, const DegradationSpec& spec);

/// Smooth gradient background, random rectangles and sinusoidal textures.
ImageBuffer procedural_image(int height, int width, std::uint64_t seed);

struct ImagePair {
  ImageBuffer degraded;
  ImageBuffer clean;
};

/// Random patch x patch crops (with random horizontal flips) of the PPM files
/// in clean_dir, each degraded with its own derived seed. An empty clean_dir
/// selects procedural clean images when allow_procedural is set.
std::vector<ImagePair> make_patch_set(const std::filesystem::path& clean_dir, const DegradationSpec& spec, int patch,
                                      int count, std::uint64_t seed, bool allow_procedural = true);

/// Sorted *.ppm files of a directory.
std::vector<std::filesystem::path> list_ppm(const std::filesystem::path& dir);

}  // namespace dacg
