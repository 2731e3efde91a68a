// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "dacg/rng.hpp"

namespace dacg {

namespace fs = std::filesystem;

DegradationSpec DegradationSpec::gaussian(double sigma, std::uint64_t seed) {
  DegradationSpec s;
  s.sigma = sigma;
  s.seed = seed;
  return s;
}

DegradationSpec DegradationSpec::hazy(double t, double airlight) {
  DegradationSpec s;
  s.kind = DegradationKind::haze;
  s.haze = {t, airlight};
  return s;
}

void DegradationSpec::validate() const {
  switch (kind) {
    case DegradationKind::gaussian_noise:
      if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("gaussian_noise: sigma must be >= 0");
      break;
    case DegradationKind::rain_streak:
      if (rain.num_streaks < 0) throw ConfigError("rain_streak: num_streaks must be >= 0");
      if (!(rain.length_px > 0.0)) throw ConfigError("rain_streak: length_px must be > 0");
      if (!(rain.intensity >= 0.0 && rain.intensity <= 1.0)) throw ConfigError("rain_streak: intensity must be in [0, 1]");
      if (!std::isfinite(rain.angle_deg)) throw ConfigError("rain_streak: angle_deg must be finite");
      break;
    case DegradationKind::haze:
      if (!(haze.transmission > 0.0 && haze.transmission <= 1.0)) throw ConfigError("haze: t must be in (0, 1]");
      if (!(haze.airlight >= 0.0 && haze.airlight <= 1.0)) throw ConfigError("haze: airlight must be in [0, 1]");
      break;
    case DegradationKind::lowlight:
      if (!(lowlight.gamma > 1.0)) throw ConfigError("lowlight: gamma must be > 1");
      if (!(lowlight.gain > 0.0 && lowlight.gain < 1.0)) throw ConfigError("lowlight: gain must be in (0, 1)");
      break;
    case DegradationKind::composite:
      if (parts.empty()) throw ConfigError("composite: needs at least one part");
      for (const auto& p : parts) p.validate();
      break;
  }
}

std::string to_string(DegradationKind kind) {
  switch (kind) {
    case DegradationKind::gaussian_noise: return "gaussian_noise";
    case DegradationKind::rain_streak: return "rain_streak";
    case DegradationKind::haze: return "haze";
    case DegradationKind::lowlight: return "lowlight";
    case DegradationKind::composite: return "composite";
  }
  return "?";
}

DegradationKind degradation_kind_from_string(const std::string& name) {
  for (auto k : {DegradationKind::gaussian_noise, DegradationKind::rain_streak, DegradationKind::haze,
                 DegradationKind::lowlight, DegradationKind::composite}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown degradation kind '" + name + "'");
}

nlohmann::json to_json(const DegradationSpec& s) {
  nlohmann::json j = {{"kind", to_string(s.kind)}, {"seed", s.seed}};
  switch (s.kind) {
    case DegradationKind::gaussian_noise: j["sigma"] = s.sigma; break;
    case DegradationKind::rain_streak:
      j["num_streaks"] = s.rain.num_streaks;
      j["length_px"] = s.rain.length_px;
      j["angle_deg"] = s.rain.angle_deg;
      j["intensity"] = s.rain.intensity;
      break;
    case DegradationKind::haze:
      j["t"] = s.haze.transmission;
      j["airlight"] = s.haze.airlight;
      break;
    case DegradationKind::lowlight:
      j["gamma"] = s.lowlight.gamma;
      j["gain"] = s.lowlight.gain;
      break;
    case DegradationKind::composite: {
      auto& parts = j["parts"] = nlohmann::json::array();
      for (const auto& p : s.parts) parts.push_back(to_json(p));
      break;
    }
  }
  return j;
}

DegradationSpec degradation_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("degradation spec must be a JSON object");
  DegradationSpec s;
  try {
    s.kind = degradation_kind_from_string(j.value("kind", std::string("gaussian_noise")));
    for (const auto& [key, v] : j.items()) {
      if (key == "kind") continue;
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "sigma") s.sigma = v.get<double>();
      else if (key == "num_streaks") s.rain.num_streaks = v.get<int>();
      else if (key == "length_px") s.rain.length_px = v.get<double>();
      else if (key == "angle_deg") s.rain.angle_deg = v.get<double>();
      else if (key == "intensity") s.rain.intensity = v.get<double>();
      else if (key == "t") s.haze.transmission = v.get<double>();
      else if (key == "airlight") s.haze.airlight = v.get<double>();
      else if (key == "gamma") s.lowlight.gamma = v.get<double>();
      else if (key == "gain") s.lowlight.gain = v.get<double>();
      else if (key == "parts") {
        for (const auto& p : v) s.parts.push_back(degradation_spec_from_json(p));
      } else {
        throw ConfigError("degradation spec: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("degradation spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string spec_tag(const DegradationSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(spec).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void add_noise(ImageBuffer& img, double sigma, std::uint64_t seed) {
  if (sigma == 0.0) return;
  Rng rng(seed);
  const double s = sigma / 255.0;
  for (float& v : img.pixels) v = static_cast<float>(static_cast<double>(v) + s * rng.normal());
}

// Anti-aliased streaks: each segment is sampled at sub-pixel steps and
// splatted bilinearly into a coverage map.
void add_rain(ImageBuffer& img, const RainParams& p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> cover(static_cast<std::size_t>(img.height) * img.width, 0.0);
  const double ang = p.angle_deg * std::numbers::pi / 180.0;
  const double dx = std::cos(ang), dy = std::sin(ang);
  const int steps = std::max(2, static_cast<int>(std::ceil(p.length_px * 4)));
  for (int s = 0; s < p.num_streaks; ++s) {
    const double x0 = rng.uniform(0.0, img.width), y0 = rng.uniform(0.0, img.height);
    for (int k = 0; k <= steps; ++k) {
      const double t = p.length_px * k / steps;
      const double fx = x0 + t * dx - 0.5, fy = y0 + t * dy - 0.5;
      const int ix = static_cast<int>(std::floor(fx)), iy = static_cast<int>(std::floor(fy));
      const double ax = fx - ix, ay = fy - iy;
      const double w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
      const int px[4] = {ix, ix + 1, ix, ix + 1}, py[4] = {iy, iy, iy + 1, iy + 1};
      for (int q = 0; q < 4; ++q) {
        if (px[q] < 0 || py[q] < 0 || px[q] >= img.width || py[q] >= img.height) continue;
        cover[static_cast<std::size_t>(py[q]) * img.width + px[q]] += w[q] * p.length_px / steps;
      }
    }
  }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double c = std::min(1.0, cover[static_cast<std::size_t>(y) * img.width + x]);
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) += static_cast<float>(p.intensity * c);
    }
}

}  // namespace

ImageBuffer degrade(const ImageBuffer& clean, const DegradationSpec& spec) {
  spec.validate();
  ImageBuffer out = clean;
  switch (spec.kind) {
    case DegradationKind::gaussian_noise:
      add_noise(out, spec.sigma, spec.seed);
      break;
    case DegradationKind::haze: {
      const double t = spec.haze.transmission, a = spec.haze.airlight;
      for (float& v : out.pixels) v = static_cast<float>(v * t + a * (1.0 - t));
      break;
    }
    case DegradationKind::rain_streak:
      add_rain(out, spec.rain, spec.seed);
      break;
    case DegradationKind::lowlight:
      for (float& v : out.pixels) {
        v = static_cast<float>(spec.lowlight.gain * std::pow(static_cast<double>(v), spec.lowlight.gamma));
      }
      break;
    case DegradationKind::composite:
      for (std::size_t i = 0; i < spec.parts.size(); ++i) {
        DegradationSpec part = spec.parts[i];
        part.seed = Rng::mix(spec.seed, i);
        out = degrade(out, part);
      }
      break;
  }
  out.clamp();
  return out;
}

ImageBuffer procedural_image(int height, int width, std::uint64_t seed) {
  Rng rng(seed);
  ImageBuffer img(height, width);
  double base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.2, 0.8);
    gx[c] = rng.uniform(-0.3, 0.3);
    gy[c] = rng.uniform(-0.3, 0.3);
  }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = static_cast<float>(base[c] + gx[c] * (x / double(width) - 0.5) + gy[c] * (y / double(height) - 0.5));
      }

  const int rects = 3 + static_cast<int>(rng.below(4));
  for (int r = 0; r < rects; ++r) {
    const int x0 = static_cast<int>(rng.below(width)), y0 = static_cast<int>(rng.below(height));
    const int rw = 2 + static_cast<int>(rng.below(std::max(1, width / 2))), rh = 2 + static_cast<int>(rng.below(std::max(1, height / 2)));
    double col[3];
    for (double& v : col) v = rng.uniform(0.05, 0.95);
    for (int y = y0; y < std::min(height, y0 + rh); ++y)
      for (int x = x0; x < std::min(width, x0 + rw); ++x)
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(col[c]);
  }

  const int waves = 1 + static_cast<int>(rng.below(2));
  for (int k = 0; k < waves; ++k) {
    const double fx = rng.uniform(0.05, 0.4), fy = rng.uniform(0.05, 0.4), phase = rng.uniform(0.0, 6.28);
    const double amp = rng.uniform(0.03, 0.1);
    double tint[3];
    for (double& v : tint) v = rng.uniform(0.5, 1.0);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double s = amp * std::sin(fx * x + fy * y + phase);
        for (int c = 0; c < 3; ++c) img.at(y, x, c) += static_cast<float>(s * tint[c]);
      }
  }
  img.clamp();
  return img;
}

std::vector<fs::path> list_ppm(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<ImagePair> make_patch_set(const fs::path& clean_dir, const DegradationSpec& spec, int patch, int count,
                                      std::uint64_t seed, bool allow_procedural) {
  spec.validate();
  if (patch < 8 || patch % 8 != 0) throw ConfigError("patch size must be a positive multiple of 8");
  if (count < 0) throw ConfigError("count must be >= 0");

  std::vector<ImageBuffer> sources;
  if (!clean_dir.empty()) {
    for (const auto& p : list_ppm(clean_dir)) {
      ImageBuffer img = load_ppm(p);
      if (img.height >= patch && img.width >= patch) sources.push_back(std::move(img));
    }
  }
  if (sources.empty() && !(clean_dir.empty() && allow_procedural)) {
    throw DataError("no readable PPM images of at least " + std::to_string(patch) + "x" + std::to_string(patch) +
                    " in '" + clean_dir.string() + "'");
  }

  std::vector<ImagePair> pairs;
  pairs.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(i)));
    ImageBuffer src = sources.empty() ? procedural_image(patch + 16, patch + 16, rng.next())
                                      : sources[rng.below(sources.size())];
    const int y0 = static_cast<int>(rng.below(src.height - patch + 1));
    const int x0 = static_cast<int>(rng.below(src.width - patch + 1));
    ImageBuffer clean = crop(src, y0, x0, patch, patch);
    if (rng.uniform() < 0.5) clean = flip_horizontal(clean);
    DegradationSpec s = spec;
    s.seed = Rng::mix(spec.seed ^ seed, static_cast<std::uint64_t>(i));
    pairs.push_back({degrade(clean, s), std::move(clean)});
  }
  return pairs;
}

}  // namespace dacg
