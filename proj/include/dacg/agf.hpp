// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "dacg/layers.hpp"

namespace dacg {

struct AgfConfig {
  int channels = 48;      // per side: F_enc and F_dec each carry this many
  int gn_groups = 4;
  int se_reduction = 4;
  int spatial_width = 0;  // width of S'; 0 selects channels / 2

  int resolved_spatial_width() const { return spatial_width > 0 ? spatial_width : std::max(1, channels / 2); }
  void validate() const;
};

/// Skip-connection fusion of an encoder and a decoder feature map of equal
/// shape into one map with the same channel count.
template <class T>
class SkipFusion {
 public:
  virtual ~SkipFusion() = default;
  virtual Tensor<T> operator()(const Tensor<T>& enc, const Tensor<T>& dec) const = 0;
};

/// Plain skip: 1x1 convolution over concat(enc, dec).
template <class T>
class ConcatFusion final : public SkipFusion<T> {
 public:
  ConcatFusion(ParamStore<T>& ps, const std::string& prefix, int channels);
  Tensor<T> operator()(const Tensor<T>& enc, const Tensor<T>& dec) const override;

  Conv2d<T> reduce;
};

/// Adaptive gated fusion: a joint spatial + channel sigmoid mask filters the
/// encoder features before they are fused with the decoder features.
template <class T>
class AgfFusion final : public SkipFusion<T> {
 public:
  AgfFusion(ParamStore<T>& ps, const std::string& prefix, AgfConfig cfg);

  /// S = 1x1(3x3(DW3x3(ReLU(GN(1x1(F_cat)))))) with C output channels.
  Tensor<T> spatial_gate_map(const Tensor<T>& f_cat) const;
  /// Linear(ReLU(Linear(GAP(F_cat)))) as (n, C, 1, 1).
  Tensor<T> channel_gate_vec(const Tensor<T>& f_cat) const;
  /// A = sigmoid(S + Cv), shape of F_enc.
  Tensor<T> mask(const Tensor<T>& enc, const Tensor<T>& dec) const;

  Tensor<T> operator()(const Tensor<T>& enc, const Tensor<T>& dec) const override;
  /// Same as operator(), also returning the mask.
  Tensor<T> fuse(const Tensor<T>& enc, const Tensor<T>& dec, Tensor<T>* mask_out) const;

  const AgfConfig& config() const { return cfg_; }

  Conv2d<T> reduce;
  Norm<T> norm;
  Conv2d<T> dw;
  Conv2d<T> conv3;
  Conv2d<T> expand;
  Linear<T> se_squeeze;
  Linear<T> se_excite;
  Conv2d<T> out;

 private:
  void check(const Tensor<T>& enc, const Tensor<T>& dec) const;
  AgfConfig cfg_;
};

extern template class ConcatFusion<float>;
extern template class ConcatFusion<double>;
extern template class AgfFusion<float>;
extern template class AgfFusion<double>;

}  // namespace dacg
