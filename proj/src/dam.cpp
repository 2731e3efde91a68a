// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/dam.hpp"

namespace dacg {

DamConfig DamConfig::for_width(int channels, int global_dim, int num_scales) {
  DamConfig cfg;
  cfg.num_scales = num_scales;
  cfg.in_channels = channels;
  cfg.global_dim = global_dim;
  cfg.stage_dims = {channels, 2 * channels, 4 * channels, 8 * channels};
  return cfg;
}

void DamConfig::validate() const {
  if (num_scales < 1) throw ConfigError("dam: num_scales must be >= 1");
  if (in_channels < 1 || global_dim < 1) throw ConfigError("dam: channel counts must be positive");
  if (stage_dims[0] != in_channels) throw ConfigError("dam: stage_dims[0] must equal in_channels");
  for (int i = 1; i < 4; ++i) {
    if (stage_dims[i] != 2 * stage_dims[i - 1]) throw ConfigError("dam: stage_dims must double at every stage");
  }
}

template <class T>
Dam<T>::Dam(ParamStore<T>& ps, const std::string& prefix, DamConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.in_channels;
  for (int s = 0; s < cfg_.num_scales; ++s) {
    const std::string name = prefix + ".branch" + std::to_string(s);
    branches.push_back(Branch{make_depthwise(ps, name + ".dw", c, branch_kernel_size(s)),
                              make_conv(ps, name + ".pw", c, c, 1)});
  }
  fuse = make_conv(ps, prefix + ".fuse", c * cfg_.num_scales, c, 1);
  gate = make_depthwise(ps, prefix + ".gate", c, 3);
  mlp_in = make_linear(ps, prefix + ".mlp.0", 2 * c, cfg_.global_dim);
  mlp_out = make_linear(ps, prefix + ".mlp.1", cfg_.global_dim, cfg_.global_dim);
  int prev = cfg_.global_dim;
  for (int i = 0; i < (cfg_.layer_prompts ? 4 : 0); ++i) {
    const std::string name = prefix + ".prompt" + std::to_string(i + 1);
    prompt_stages[i].proj = make_linear(ps, name + ".proj", prev, cfg_.stage_dims[i]);
    prompt_stages[i].norm = make_norm(ps, name + ".norm", cfg_.stage_dims[i], NormKind::layer, 1, T(1e-5));
    prev = cfg_.stage_dims[i];
  }
}

template <class T>
std::vector<Tensor<T>> Dam<T>::multi_scale_extract(const Tensor<T>& f_in) const {
  if (f_in.shape().c != cfg_.in_channels) {
    throw ConfigError("dam: expected " + std::to_string(cfg_.in_channels) + " channels, got " + f_in.shape().str());
  }
  std::vector<Tensor<T>> out;
  out.reserve(branches.size());
  for (const auto& b : branches) out.push_back(b.pointwise(b.depthwise(f_in)));
  return out;
}

template <class T>
Tensor<T> Dam<T>::fuse_and_gate(const std::vector<Tensor<T>>& parts, Tensor<T>* fused, Tensor<T>* mask) const {
  if (parts.empty()) throw UsageError("dam: fuse_and_gate needs at least one branch");
  const Tensor<T> f_fuse = fuse(concat_channels(parts));
  const Tensor<T> m = sigmoid(gate(f_fuse));
  if (fused != nullptr) *fused = f_fuse;
  if (mask != nullptr) *mask = m;
  return mul(f_fuse, m);
}

template <class T>
Tensor<T> Dam<T>::stat_pool(const Tensor<T>& gated) const {
  return pool(gated, PoolKind::mean_std);
}

template <class T>
Tensor<T> Dam<T>::global_encode(const Tensor<T>& z_stat) const {
  return mlp_out(gelu(mlp_in(z_stat)));
}

template <class T>
std::array<Tensor<T>, 4> Dam<T>::make_layer_prompts(const Tensor<T>& p_global) const {
  if (!cfg_.layer_prompts) throw UsageError("dam: built without layer prompts");
  std::array<Tensor<T>, 4> prompts;
  Tensor<T> prev = p_global;
  for (int i = 0; i < 4; ++i) {
    prompts[i] = gelu(prompt_stages[i].norm(prompt_stages[i].proj(prev)));
    prev = prompts[i];
  }
  return prompts;
}

template <class T>
DegradationContext<T> Dam<T>::operator()(const Tensor<T>& f_in) const {
  DegradationContext<T> ctx;
  ctx.global_feature = global_encode(stat_pool(fuse_and_gate(multi_scale_extract(f_in))));
  if (cfg_.layer_prompts) ctx.layer_prompts = make_layer_prompts(ctx.global_feature);
  return ctx;
}

template class Dam<float>;
template class Dam<double>;

}  // namespace dacg
