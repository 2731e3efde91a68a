// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/cgdm.hpp"

namespace dacg {

void CgdmConfig::validate() const {
  if (latent_channels < 1) throw ConfigError("cgdm: latent_channels must be >= 1");
  if (global_dim < 1) throw ConfigError("cgdm: global_dim must be >= 1");
}

template <class T>
Cgdm<T>::Cgdm(ParamStore<T>& ps, const std::string& prefix, CgdmConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int l = cfg_.latent_channels;
  spatial_dw = make_depthwise(ps, prefix + ".spatial.dw", l, 3);
  spatial_pw = make_conv(ps, prefix + ".spatial.pw", l, l, 1);
  // Bias-free so the spectral path stays linear in F for a fixed prompt.
  spectral_mix = make_conv(ps, prefix + ".spectral.mix", 2 * l, 2 * l, 1, 1, false);
  spectral_gate = make_linear(ps, prefix + ".spectral.gate", cfg_.global_dim, 2 * l);
  fuse = make_conv(ps, prefix + ".fuse", 2 * l, l, 1);
}

template <class T>
Tensor<T> Cgdm<T>::spatial_branch(const Tensor<T>& f) const {
  return spatial_pw(gelu(spatial_dw(f)));
}

template <class T>
Tensor<T> Cgdm<T>::freq_branch(const Tensor<T>& f, const Tensor<T>& p_global, Tensor<T>* mask) const {
  const int l = cfg_.latent_channels;
  if (f.shape().c != l) throw ConfigError("cgdm: expected " + std::to_string(l) + " channels, got " + f.shape().str());
  const ComplexMap<T> z = fft2d(f);
  const Tensor<T> mixed = spectral_mix(concat_channels<T>({z.real, z.imag}));
  const Tensor<T> m = sigmoid(spectral_gate(p_global));  // (n, 2L, 1, 1)
  if (mask != nullptr) *mask = m;
  const Tensor<T> gated = mul(mixed, m);
  return ifft2d(ComplexMap<T>{slice_channels(gated, 0, l), slice_channels(gated, l, l)});
}

template <class T>
Tensor<T> Cgdm<T>::operator()(const Tensor<T>& f, const Tensor<T>& p_global) const {
  return add(f, fuse(concat_channels<T>({spatial_branch(f), freq_branch(f, p_global)})));
}

template class Cgdm<float>;
template class Cgdm<double>;

}  // namespace dacg
