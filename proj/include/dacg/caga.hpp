// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "dacg/layers.hpp"

namespace dacg {

struct CagaConfig {
  int channels = 48;
  int heads = 1;
  int prompt_dim = 48;
  /// tau_h = exp(theta_base[h] + W_tau P). Off: tau_h = 1.
  bool adaptive_temperature = true;
  /// O_gated = O_attn * sigmoid(Linear(P)). Off: O_attn passes through.
  bool gated_output = true;

  bool uses_prompt() const { return adaptive_temperature || gated_output; }
  void validate() const;
};

struct BlockConfig {
  CagaConfig caga;
  double ffn_expansion = 2.66;
  double norm_eps = 1e-6;

  void validate() const;
};

/// Intermediate tensors of one attention evaluation, for inspection.
template <class T>
struct AttentionTrace {
  Tensor<T> temperature;  // (n, heads, 1, 1)
  Tensor<T> attention;    // (n, heads, d, d), rows are probability vectors
  Tensor<T> output;       // O_attn, before gating
  Tensor<T> gate;         // (n, c, 1, 1)
};

/// Transposed (channel) multi-head attention with prompt-conditioned
/// temperature and output gate.
template <class T>
class CagaAttention {
 public:
  CagaAttention(ParamStore<T>& ps, const std::string& prefix, CagaConfig cfg);

  /// (n, heads, 1, 1) strictly positive temperatures.
  Tensor<T> compute_temperature(const Tensor<T>& prompt) const;

  /// prompt may be null only when neither toggle is enabled.
  Tensor<T> operator()(const Tensor<T>& x, const Tensor<T>* prompt, AttentionTrace<T>* trace = nullptr) const;

  const CagaConfig& config() const { return cfg_; }

  Conv2d<T> qkv;
  Conv2d<T> qkv_dw;
  Conv2d<T> project_out;
  Tensor<T> theta_base;  // (1, heads, 1, 1); undefined without adaptive temperature
  Linear<T> temperature_proj;
  Linear<T> gate_proj;

 private:
  CagaConfig cfg_;
};

/// expand 1x1 -> depth-wise 3x3 -> GELU(a) * b -> project 1x1.
template <class T>
class GatedDconvFfn {
 public:
  GatedDconvFfn(ParamStore<T>& ps, const std::string& prefix, int channels, double expansion);
  Tensor<T> operator()(const Tensor<T>& x) const;

  int hidden() const { return hidden_; }

  Conv2d<T> project_in;
  Conv2d<T> dwconv;
  Conv2d<T> project_out;

 private:
  int hidden_;
};

/// x + attn(LN(x), P) followed by x + ffn(LN(x)).
template <class T>
class TransformerBlock {
 public:
  TransformerBlock(ParamStore<T>& ps, const std::string& prefix, BlockConfig cfg);
  Tensor<T> operator()(const Tensor<T>& x, const Tensor<T>* prompt) const;

  /// Zeroes the attention and FFN output projections; the block becomes the identity.
  void zero_output_projections();

  Norm<T> norm1;
  CagaAttention<T> attn;
  Norm<T> norm2;
  GatedDconvFfn<T> ffn;
};

extern template class CagaAttention<float>;
extern template class CagaAttention<double>;
extern template class GatedDconvFfn<float>;
extern template class GatedDconvFfn<double>;
extern template class TransformerBlock<float>;
extern template class TransformerBlock<double>;

}  // namespace dacg
