// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

namespace dacg {

namespace fs = std::filesystem;

const NamedArray* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

fs::path checkpoint_base(const fs::path& path) {
  if (path.extension() == ".json" || path.extension() == ".bin") {
    fs::path base = path;
    return base.replace_extension();
  }
  return path;
}

namespace {

fs::path with_suffix(const fs::path& base, const char* suffix) {
  fs::path p = base;
  p += suffix;
  return p;
}

void put_le(std::string& out, float v) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

float get_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + p.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing '" + p.string() + "'");
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot open '" + p.string() + "'");
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  const fs::path base = checkpoint_base(path);
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  std::string payload;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& t : ckpt.tensors) {
    if (t.values.size() != t.shape.numel()) throw UsageError("checkpoint: tensor '" + t.name + "' size mismatch");
    entries.push_back({{"name", t.name},
                       {"shape", {t.shape.n, t.shape.c, t.shape.h, t.shape.w}},
                       {"offset", payload.size()},
                       {"dtype", "f32-le"}});
    for (float v : t.values) put_le(payload, v);
  }
  const nlohmann::json manifest = {
      {"schema_version", kCheckpointSchemaVersion},
      {"config", to_json(ckpt.config)},
      {"state", ckpt.state},
      {"payload", with_suffix(base, ".bin").filename().string()},
      {"payload_bytes", payload.size()},
      {"tensors", entries},
  };
  write_file(with_suffix(base, ".bin"), payload);
  write_file(with_suffix(base, ".json"), manifest.dump(1) + "\n");
}

Checkpoint load_checkpoint(const fs::path& path) {
  const fs::path base = checkpoint_base(path);
  const fs::path mpath = with_suffix(base, ".json");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(mpath));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint manifest '" + mpath.string() + "': " + e.what());
  }
  Checkpoint ckpt;
  std::string payload;
  try {
    if (m.at("schema_version").get<int>() != kCheckpointSchemaVersion) {
      throw DataError("checkpoint '" + mpath.string() + "': unsupported schema_version " +
                      m.at("schema_version").dump());
    }
    try {
      ckpt.config = model_config_from_json(m.at("config"));
    } catch (const ConfigError& e) {
      throw DataError("checkpoint '" + mpath.string() + "': " + e.what());
    }
    if (m.contains("state")) ckpt.state = m.at("state");
    payload = read_file(base.parent_path() / m.at("payload").get<std::string>());
    const auto declared = m.at("payload_bytes").get<std::size_t>();
    if (payload.size() != declared) {
      throw DataError("checkpoint payload is " + std::to_string(payload.size()) + " bytes, manifest declares " +
                      std::to_string(declared));
    }
    std::size_t expected_offset = 0;
    for (const auto& e : m.at("tensors")) {
      NamedArray t;
      t.name = e.at("name").get<std::string>();
      const auto dims = e.at("shape").get<std::array<int, 4>>();
      for (int d : dims) {
        if (d < 1) throw DataError("checkpoint tensor '" + t.name + "' has a non-positive extent");
      }
      t.shape = Shape{dims[0], dims[1], dims[2], dims[3]};
      if (e.at("dtype").get<std::string>() != "f32-le") {
        throw DataError("checkpoint tensor '" + t.name + "' has unsupported dtype " + e.at("dtype").dump());
      }
      const auto offset = e.at("offset").get<std::size_t>();
      if (offset != expected_offset) {
        throw DataError("checkpoint tensor '" + t.name + "' offset " + std::to_string(offset) + ", expected " +
                        std::to_string(expected_offset));
      }
      const std::size_t bytes = 4 * t.shape.numel();
      if (offset + bytes > payload.size()) throw DataError("checkpoint tensor '" + t.name + "' runs past the payload");
      t.values.resize(t.shape.numel());
      const auto* p = reinterpret_cast<const unsigned char*>(payload.data()) + offset;
      for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = get_le(p + 4 * i);
      expected_offset += bytes;
      ckpt.tensors.push_back(std::move(t));
    }
    if (expected_offset != payload.size()) {
      throw DataError("checkpoint payload has " + std::to_string(payload.size() - expected_offset) +
                      " trailing bytes");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint manifest '" + mpath.string() + "': " + e.what());
  }
  return ckpt;
}

template <class T>
void append_tensors(std::vector<NamedArray>& out, const ParamStore<T>& ps, const std::string& prefix) {
  for (const auto& [name, t] : ps.entries()) {
    out.push_back({prefix + name, t.shape(), std::vector<float>(t.values().begin(), t.values().end())});
  }
}

template <class T>
void restore_tensors(ParamStore<T>& ps, const Checkpoint& ckpt, const std::string& prefix) {
  for (const auto& [name, t] : ps.entries()) {
    const NamedArray* src = ckpt.find(prefix + name);
    if (src == nullptr) throw ConfigError("checkpoint is missing tensor '" + prefix + name + "'");
    if (!(src->shape == t.shape())) {
      throw ConfigError("tensor '" + prefix + name + "': checkpoint shape " + src->shape.str() + ", model shape " +
                        t.shape().str());
    }
  }
  if (prefix.empty()) {
    for (const auto& t : ckpt.tensors) {
      // Optimizer state and other extras carry a "<group>/" prefix.
      if (t.name.find('/') == std::string::npos && ps.find(t.name) == nullptr) {
        throw ConfigError("checkpoint tensor '" + t.name + "' has no counterpart in the model");
      }
    }
  }
  for (const auto& [name, t] : ps.entries()) {
    const NamedArray* src = ckpt.find(prefix + name);
    Tensor<T> dst = t;  // shares storage with the parameter
    std::copy(src->values.begin(), src->values.end(), dst.values().begin());
  }
}

template <class T>
Checkpoint make_checkpoint(const Model<T>& model, nlohmann::json state) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.state = std::move(state);
  append_tensors(ckpt.tensors, model.params());
  return ckpt;
}

template <class T>
Model<T> load_model(const fs::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  Model<T> model(ckpt.config);
  restore_tensors(model.params(), ckpt);
  return model;
}

template void append_tensors(std::vector<NamedArray>&, const ParamStore<float>&, const std::string&);
template void append_tensors(std::vector<NamedArray>&, const ParamStore<double>&, const std::string&);
template void restore_tensors(ParamStore<float>&, const Checkpoint&, const std::string&);
template void restore_tensors(ParamStore<double>&, const Checkpoint&, const std::string&);
template Checkpoint make_checkpoint(const Model<float>&, nlohmann::json);
template Checkpoint make_checkpoint(const Model<double>&, nlohmann::json);
template Model<float> load_model(const fs::path&);
template Model<double> load_model(const fs::path&);

}  // namespace dacg
