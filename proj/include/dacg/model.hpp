// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dacg/agf.hpp"
#include "dacg/caga.hpp"
#include "dacg/cgdm.hpp"
#include "dacg/dam.hpp"

namespace dacg {

struct ModelToggles {
  bool use_agf = true;
  bool use_cgdm = true;
  bool use_caga = true;
  bool use_adaptive_temp = true;
  bool use_gated_output = true;

  bool operator==(const ModelToggles&) const = default;
};

struct ModelConfig {
  std::string name = "full";
  int base_channels = 48;
  /// Blocks per encoder level; the last entry is the shared bottleneck.
  std::array<int, 4> enc_blocks{4, 6, 6, 8};
  /// Blocks per decoder level 1..3. Must mirror enc_blocks[0..2].
  std::array<int, 3> dec_blocks{4, 6, 6};
  int refinement_blocks = 4;
  std::array<int, 4> heads{1, 2, 4, 8};
  double ffn_expansion = 2.66;
  int global_dim = 256;
  int num_scales = 3;
  ModelToggles toggles;
  std::uint64_t seed = 0;

  /// "full" (C=48), "small" (C=32) or "tiny" (C=8, one block per level).
  static ModelConfig preset(std::string_view name);

  bool adaptive_temperature() const { return toggles.use_caga && toggles.use_adaptive_temp; }
  bool gated_output() const { return toggles.use_caga && toggles.use_gated_output; }
  /// DAM is built only when something consumes its prompts.
  bool needs_dam() const { return toggles.use_cgdm || adaptive_temperature() || gated_output(); }
  int width(int level) const { return base_channels << level; }

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
/// Overlays the keys present in j onto base. Unknown keys and wrong types
/// raise ConfigError; the result is validated.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

template <class T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  /// image: (n, 3, h, w) with h, w divisible by 8. Returns image + residual.
  Tensor<T> forward(const Tensor<T>& image) const;
  Tensor<T> operator()(const Tensor<T>& image) const { return forward(image); }

  std::size_t param_count() const { return params_.count(); }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }

  /// Zeroes every block's output projections, the CGDM fusion and the head,
  /// turning the network into the identity map.
  void zero_output_projections();

  Conv2d<T> stem;
  std::optional<Dam<T>> dam;
  std::array<std::vector<TransformerBlock<T>>, 4> encoder;
  std::array<Conv2d<T>, 3> down;  // level l -> l+1
  std::optional<Cgdm<T>> cgdm;
  std::array<Conv2d<T>, 3> up;    // level l+1 -> l
  std::array<std::unique_ptr<SkipFusion<T>>, 3> fusion;
  std::array<std::vector<TransformerBlock<T>>, 3> decoder;
  std::vector<TransformerBlock<T>> refinement;
  Conv2d<T> head;

 private:
  ModelConfig cfg_;
  ParamStore<T> params_;
};

extern template class Model<float>;
extern template class Model<double>;

struct AblationVariant {
  std::string label;  // e.g. "V(a)", "VI-baseline"
  std::string description;
  ModelConfig config;
};

/// Seven module configurations (rows (a)-(f) and the full model) followed by
/// four attention configurations with AGF and CGDM disabled. Every variant
/// inherits the sizes of base.
std::vector<AblationVariant> ablation_variants(const ModelConfig& base = ModelConfig::preset("tiny"));

}  // namespace dacg
