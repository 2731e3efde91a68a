// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dacg/model.hpp"

namespace dacg {

inline constexpr int kCheckpointSchemaVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

/// A checkpoint is a file pair: <base>.json (manifest) and <base>.bin
/// (little-endian 32-bit floats, tensors back to back in manifest order).
struct Checkpoint {
  ModelConfig config;
  nlohmann::json state = nlohmann::json::object();  // training step, optimizer settings, ...
  std::vector<NamedArray> tensors;

  const NamedArray* find(std::string_view name) const;
};

/// Accepts "run/final", "run/final.json" or "run/final.bin".
std::filesystem::path checkpoint_base(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws DataError for unreadable or inconsistent files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every parameter (converted to float) under its own name prefixed by prefix.
template <class T>
void append_tensors(std::vector<NamedArray>& out, const ParamStore<T>& ps, const std::string& prefix = "");

/// Overwrites ps from entries named prefix + parameter name. Throws
/// ConfigError naming the first parameter (in model order) that is missing
/// or has a different shape, and any unprefixed checkpoint tensor the model
/// does not know.
template <class T>
void restore_tensors(ParamStore<T>& ps, const Checkpoint& ckpt, const std::string& prefix = "");

template <class T>
Checkpoint make_checkpoint(const Model<T>& model, nlohmann::json state = nlohmann::json::object());

/// Builds the model described by the checkpoint and loads its weights.
template <class T>
Model<T> load_model(const std::filesystem::path& path);

}  // namespace dacg
