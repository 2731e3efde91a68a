// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/model.hpp"

namespace dacg {

ModelConfig ModelConfig::preset(std::string_view name) {
  ModelConfig cfg;
  if (name == "full") return cfg;
  if (name == "small") {
    cfg.name = "small";
    cfg.base_channels = 32;
    return cfg;
  }
  if (name == "tiny") {
    cfg.name = "tiny";
    cfg.base_channels = 8;
    cfg.enc_blocks = {1, 1, 1, 1};
    cfg.dec_blocks = {1, 1, 1};
    cfg.refinement_blocks = 1;
    cfg.heads = {1, 1, 2, 2};
    cfg.global_dim = 64;
    return cfg;
  }
  throw ConfigError("unknown model preset '" + std::string(name) + "' (expected full, small or tiny)");
}

void ModelConfig::validate() const {
  if (base_channels < 1) throw ConfigError("model: base_channels must be >= 1");
  for (int l = 0; l < 4; ++l) {
    if (enc_blocks[l] < 1) throw ConfigError("model: enc_blocks entries must be >= 1");
    if (heads[l] < 1 || width(l) % heads[l] != 0) {
      throw ConfigError("model: level " + std::to_string(l + 1) + " width " + std::to_string(width(l)) +
                        " not divisible by heads=" + std::to_string(heads[l]));
    }
  }
  for (int l = 0; l < 3; ++l) {
    if (dec_blocks[l] != enc_blocks[l]) {
      throw ConfigError("model: dec_blocks must mirror enc_blocks at level " + std::to_string(l + 1));
    }
  }
  if (refinement_blocks < 1) throw ConfigError("model: refinement_blocks must be >= 1");
  if (!(ffn_expansion > 0.0)) throw ConfigError("model: ffn_expansion must be > 0");
  if (global_dim < 1) throw ConfigError("model: global_dim must be >= 1");
  if (num_scales < 1) throw ConfigError("model: num_scales must be >= 1");
  if (toggles.use_agf) {
    for (int l = 0; l < 3; ++l) AgfConfig{width(l)}.validate();
  }
}

nlohmann::json to_json(const ModelConfig& cfg) {
  return {
      {"name", cfg.name},
      {"base_channels", cfg.base_channels},
      {"enc_blocks", cfg.enc_blocks},
      {"dec_blocks", cfg.dec_blocks},
      {"refinement_blocks", cfg.refinement_blocks},
      {"heads", cfg.heads},
      {"ffn_expansion", cfg.ffn_expansion},
      {"global_dim", cfg.global_dim},
      {"num_scales", cfg.num_scales},
      {"use_agf", cfg.toggles.use_agf},
      {"use_cgdm", cfg.toggles.use_cgdm},
      {"use_caga", cfg.toggles.use_caga},
      {"use_adaptive_temp", cfg.toggles.use_adaptive_temp},
      {"use_gated_output", cfg.toggles.use_gated_output},
      {"seed", cfg.seed},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig cfg) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "name") cfg.name = value.get<std::string>();
      else if (key == "base_channels") cfg.base_channels = value.get<int>();
      else if (key == "enc_blocks") cfg.enc_blocks = value.get<std::array<int, 4>>();
      else if (key == "dec_blocks") cfg.dec_blocks = value.get<std::array<int, 3>>();
      else if (key == "refinement_blocks") cfg.refinement_blocks = value.get<int>();
      else if (key == "heads") cfg.heads = value.get<std::array<int, 4>>();
      else if (key == "ffn_expansion") cfg.ffn_expansion = value.get<double>();
      else if (key == "global_dim") cfg.global_dim = value.get<int>();
      else if (key == "num_scales") cfg.num_scales = value.get<int>();
      else if (key == "use_agf") cfg.toggles.use_agf = value.get<bool>();
      else if (key == "use_cgdm") cfg.toggles.use_cgdm = value.get<bool>();
      else if (key == "use_caga") cfg.toggles.use_caga = value.get<bool>();
      else if (key == "use_adaptive_temp") cfg.toggles.use_adaptive_temp = value.get<bool>();
      else if (key == "use_gated_output") cfg.toggles.use_gated_output = value.get<bool>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else throw ConfigError("model config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("model config: bad value for '" + key + "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

namespace {

template <class T>
std::vector<TransformerBlock<T>> make_blocks(ParamStore<T>& ps, const std::string& prefix, int count,
                                             const ModelConfig& cfg, int level) {
  BlockConfig bc;
  bc.caga.channels = cfg.width(level);
  bc.caga.heads = cfg.heads[level];
  bc.caga.prompt_dim = cfg.width(level);
  bc.caga.adaptive_temperature = cfg.adaptive_temperature();
  bc.caga.gated_output = cfg.gated_output();
  bc.ffn_expansion = cfg.ffn_expansion;
  std::vector<TransformerBlock<T>> blocks;
  blocks.reserve(count);
  for (int i = 0; i < count; ++i) blocks.emplace_back(ps, prefix + "." + std::to_string(i), bc);
  return blocks;
}

template <class T>
Tensor<T> run(const std::vector<TransformerBlock<T>>& blocks, Tensor<T> x, const Tensor<T>* prompt) {
  for (const auto& b : blocks) x = b(x, prompt);
  return x;
}

}  // namespace

template <class T>
Model<T>::Model(const ModelConfig& cfg) : cfg_(cfg), params_(cfg.seed) {
  cfg_.validate();
  ParamStore<T>& ps = params_;
  const int c = cfg_.base_channels;
  stem = make_conv(ps, "stem", 3, c, 3);
  if (cfg_.needs_dam()) {
    DamConfig dc = DamConfig::for_width(c, cfg_.global_dim, cfg_.num_scales);
    dc.layer_prompts = cfg_.adaptive_temperature() || cfg_.gated_output();
    dam.emplace(ps, "dam", dc);
  }
  for (int l = 0; l < 4; ++l) {
    encoder[l] = make_blocks(ps, "encoder" + std::to_string(l + 1), cfg_.enc_blocks[l], cfg_, l);
    if (l < 3) down[l] = make_conv(ps, "down" + std::to_string(l + 1), 4 * cfg_.width(l), cfg_.width(l + 1), 1);
  }
  if (cfg_.toggles.use_cgdm) cgdm.emplace(ps, "cgdm", CgdmConfig{cfg_.width(3), cfg_.global_dim});
  for (int l = 2; l >= 0; --l) {
    const std::string lv = std::to_string(l + 1);
    up[l] = make_conv(ps, "up" + lv, cfg_.width(l + 1), 4 * cfg_.width(l), 1);
    if (cfg_.toggles.use_agf) {
      fusion[l] = std::make_unique<AgfFusion<T>>(ps, "agf" + lv, AgfConfig{cfg_.width(l)});
    } else {
      fusion[l] = std::make_unique<ConcatFusion<T>>(ps, "skip" + lv, cfg_.width(l));
    }
    decoder[l] = make_blocks(ps, "decoder" + lv, cfg_.dec_blocks[l], cfg_, l);
  }
  refinement = make_blocks(ps, "refinement", cfg_.refinement_blocks, cfg_, 0);
  head = make_conv(ps, "head", c, 3, 3);
}

template <class T>
Tensor<T> Model<T>::forward(const Tensor<T>& image) const {
  const Shape s = image.shape();
  if (s.c != 3) throw DimensionError("model: expected 3 input channels, got " + s.str());
  if (s.h % 8 != 0 || s.w % 8 != 0 || s.h == 0 || s.w == 0) {
    throw DimensionError("model: spatial size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         " must be a positive multiple of 8");
  }
  const Tensor<T> f_in = stem(image);
  std::optional<DegradationContext<T>> ctx;
  if (dam) ctx = (*dam)(f_in);
  const auto prompt = [&](int l) { return ctx && dam->config().layer_prompts ? &ctx->layer_prompts[l] : nullptr; };

  std::array<Tensor<T>, 3> skips;
  Tensor<T> x = f_in;
  for (int l = 0; l < 3; ++l) {
    x = run(encoder[l], x, prompt(l));
    skips[l] = x;
    x = down[l](resample(x, ResampleKind::unshuffle, 2));
  }
  x = run(encoder[3], x, prompt(3));
  if (cgdm) x = (*cgdm)(x, ctx->global_feature);
  for (int l = 2; l >= 0; --l) {
    x = resample(up[l](x), ResampleKind::shuffle, 2);
    x = (*fusion[l])(skips[l], x);
    x = run(decoder[l], x, prompt(l));
  }
  x = run(refinement, x, prompt(0));
  return add(image, head(x));
}

template <class T>
void Model<T>::zero_output_projections() {
  for (auto& level : encoder)
    for (auto& b : level) b.zero_output_projections();
  for (auto& level : decoder)
    for (auto& b : level) b.zero_output_projections();
  for (auto& b : refinement) b.zero_output_projections();
  if (cgdm) cgdm->fuse.zero();
  head.zero();
}

template class Model<float>;
template class Model<double>;

std::vector<AblationVariant> ablation_variants(const ModelConfig& base) {
  struct Row {
    const char* label;
    const char* description;
    bool agf, cgdm, caga, temp, gate;
  };
  static constexpr Row kRows[] = {
      {"V(a)", "AGF", true, false, false, true, true},
      {"V(b)", "CGDM", false, true, false, true, true},
      {"V(c)", "CAGA", false, false, true, true, true},
      {"V(d)", "AGF + CGDM", true, true, false, true, true},
      {"V(e)", "CGDM + CAGA", false, true, true, true, true},
      {"V(f)", "AGF + CAGA", true, false, true, true, true},
      {"V(full)", "AGF + CGDM + CAGA", true, true, true, true, true},
      {"VI-baseline", "plain attention (no T, no G)", false, false, true, false, false},
      {"VI-T", "adaptive temperature only", false, false, true, true, false},
      {"VI-G", "gated output only", false, false, true, false, true},
      {"VI-CAGA", "adaptive temperature + gated output", false, false, true, true, true},
  };
  std::vector<AblationVariant> out;
  for (const Row& r : kRows) {
    ModelConfig cfg = base;
    cfg.toggles = ModelToggles{r.agf, r.cgdm, r.caga, r.temp, r.gate};
    cfg.validate();
    out.push_back({r.label, r.description, cfg});
  }
  return out;
}

}  // namespace dacg
