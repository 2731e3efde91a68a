// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/caga.hpp"

namespace dacg {

void CagaConfig::validate() const {
  if (heads < 1) throw ConfigError("caga: heads must be >= 1");
  if (channels < 1 || channels % heads != 0) {
    throw ConfigError("caga: channels=" + std::to_string(channels) + " not divisible by heads=" + std::to_string(heads));
  }
  if (uses_prompt() && prompt_dim < 1) throw ConfigError("caga: prompt_dim must be >= 1");
}

void BlockConfig::validate() const {
  caga.validate();
  if (!(ffn_expansion > 0.0)) throw ConfigError("block: ffn_expansion must be > 0");
  if (!(norm_eps > 0.0)) throw ConfigError("block: norm_eps must be > 0");
}

template <class T>
CagaAttention<T>::CagaAttention(ParamStore<T>& ps, const std::string& prefix, CagaConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.channels;
  qkv = make_conv(ps, prefix + ".qkv", c, 3 * c, 1);
  qkv_dw = make_depthwise(ps, prefix + ".qkv_dw", 3 * c, 3);
  project_out = make_conv(ps, prefix + ".project_out", c, c, 1);
  if (cfg_.adaptive_temperature) {
    theta_base = ps.add(prefix + ".theta_base", Shape{1, cfg_.heads, 1, 1}, Init::zeros);
    temperature_proj = make_linear(ps, prefix + ".temperature", cfg_.prompt_dim, cfg_.heads);
  }
  if (cfg_.gated_output) gate_proj = make_linear(ps, prefix + ".gate", cfg_.prompt_dim, c);
}

template <class T>
Tensor<T> CagaAttention<T>::compute_temperature(const Tensor<T>& prompt) const {
  if (!cfg_.adaptive_temperature) throw UsageError("caga: adaptive temperature is disabled");
  return exp(add(temperature_proj(prompt), theta_base));
}

template <class T>
Tensor<T> CagaAttention<T>::operator()(const Tensor<T>& x, const Tensor<T>* prompt, AttentionTrace<T>* trace) const {
  const Shape s = x.shape();
  if (s.c != cfg_.channels) {
    throw ConfigError("caga: expected " + std::to_string(cfg_.channels) + " channels, got " + s.str());
  }
  if (cfg_.uses_prompt() && (prompt == nullptr || !prompt->defined())) {
    throw UsageError("caga: a layer prompt is required when temperature or gating is enabled");
  }
  const int c = s.c;
  const int d = c / cfg_.heads;
  const int hw = s.h * s.w;
  const Tensor<T> qkv_map = qkv_dw(qkv(x));
  const Shape head_shape{s.n, cfg_.heads, d, hw};
  const Tensor<T> q = l2_normalize(reshape(slice_channels(qkv_map, 0, c), head_shape));
  const Tensor<T> k = l2_normalize(reshape(slice_channels(qkv_map, c, c), head_shape));
  const Tensor<T> v = reshape(slice_channels(qkv_map, 2 * c, c), head_shape);

  Tensor<T> logits = matmul(q, k, false, true);  // (n, heads, d, d)
  Tensor<T> tau;
  if (cfg_.adaptive_temperature) {
    tau = compute_temperature(*prompt);
    logits = div(logits, tau);
  }
  const Tensor<T> attn = softmax(logits);
  const Tensor<T> o_attn = project_out(reshape(matmul(attn, v), s));

  Tensor<T> gate;
  Tensor<T> out = o_attn;
  if (cfg_.gated_output) {
    gate = sigmoid(gate_proj(*prompt));
    out = mul(o_attn, gate);
  }
  if (trace != nullptr) {
    trace->temperature = tau;
    trace->attention = attn;
    trace->output = o_attn;
    trace->gate = gate;
  }
  return out;
}

template <class T>
GatedDconvFfn<T>::GatedDconvFfn(ParamStore<T>& ps, const std::string& prefix, int channels, double expansion)
    : hidden_(static_cast<int>(channels * expansion)) {
  if (hidden_ < 1) throw ConfigError("ffn: hidden width must be >= 1");
  project_in = make_conv(ps, prefix + ".project_in", channels, 2 * hidden_, 1);
  dwconv = make_depthwise(ps, prefix + ".dwconv", 2 * hidden_, 3);
  project_out = make_conv(ps, prefix + ".project_out", hidden_, channels, 1);
}

template <class T>
Tensor<T> GatedDconvFfn<T>::operator()(const Tensor<T>& x) const {
  const Tensor<T> h = dwconv(project_in(x));
  return project_out(mul(gelu(slice_channels(h, 0, hidden_)), slice_channels(h, hidden_, hidden_)));
}

template <class T>
TransformerBlock<T>::TransformerBlock(ParamStore<T>& ps, const std::string& prefix, BlockConfig cfg)
    : norm1(make_norm(ps, prefix + ".norm1", (cfg.validate(), cfg.caga.channels), NormKind::layer, 1,
                      static_cast<T>(cfg.norm_eps))),
      attn(ps, prefix + ".attn", cfg.caga),
      norm2(make_norm(ps, prefix + ".norm2", cfg.caga.channels, NormKind::layer, 1, static_cast<T>(cfg.norm_eps))),
      ffn(ps, prefix + ".ffn", cfg.caga.channels, cfg.ffn_expansion) {}

template <class T>
Tensor<T> TransformerBlock<T>::operator()(const Tensor<T>& x, const Tensor<T>* prompt) const {
  const Tensor<T> y = add(x, attn(norm1(x), prompt));
  return add(y, ffn(norm2(y)));
}

template <class T>
void TransformerBlock<T>::zero_output_projections() {
  attn.project_out.zero();
  ffn.project_out.zero();
}

template class CagaAttention<float>;
template class CagaAttention<double>;
template class GatedDconvFfn<float>;
template class GatedDconvFfn<double>;
template class TransformerBlock<float>;
template class TransformerBlock<double>;

}  // namespace dacg
