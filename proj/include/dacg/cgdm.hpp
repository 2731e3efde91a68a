// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "dacg/layers.hpp"

namespace dacg {

struct CgdmConfig {
  int latent_channels = 384;
  int global_dim = 256;

  void validate() const;
};

/// Bottleneck dual-domain modulation.
///
/// Spatial branch: 1x1(GELU(DW3x3(F))). Spectral branch: the real and
/// imaginary planes of fft2d(F) are stacked (2L channels), mixed by a
/// bias-free 1x1 convolution, scaled per channel by sigmoid(W_gate P_global)
/// and sent back through ifft2d, keeping the real part. The branches are
/// concatenated, projected to L channels and added to F.
template <class T>
class Cgdm {
 public:
  Cgdm(ParamStore<T>& ps, const std::string& prefix, CgdmConfig cfg);

  Tensor<T> spatial_branch(const Tensor<T>& f) const;
  /// When non-null, mask receives M_freq with shape (n, 2L, 1, 1).
  Tensor<T> freq_branch(const Tensor<T>& f, const Tensor<T>& p_global, Tensor<T>* mask = nullptr) const;
  Tensor<T> operator()(const Tensor<T>& f, const Tensor<T>& p_global) const;

  const CgdmConfig& config() const { return cfg_; }

  Conv2d<T> spatial_dw;
  Conv2d<T> spatial_pw;
  Conv2d<T> spectral_mix;
  Linear<T> spectral_gate;
  Conv2d<T> fuse;

 private:
  CgdmConfig cfg_;
};

extern template class Cgdm<float>;
extern template class Cgdm<double>;

}  // namespace dacg
