// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/agf.hpp"

namespace dacg {

void AgfConfig::validate() const {
  if (channels < 1) throw ConfigError("agf: channels must be >= 1");
  const int sw = resolved_spatial_width();
  if (gn_groups < 1 || sw % gn_groups != 0) {
    throw ConfigError("agf: spatial width " + std::to_string(sw) + " not divisible by gn_groups=" +
                      std::to_string(gn_groups));
  }
  if (se_reduction < 1 || (2 * channels) / se_reduction < 1) {
    throw ConfigError("agf: se_reduction=" + std::to_string(se_reduction) + " leaves no squeeze width");
  }
}

template <class T>
ConcatFusion<T>::ConcatFusion(ParamStore<T>& ps, const std::string& prefix, int channels)
    : reduce(make_conv(ps, prefix + ".reduce", 2 * channels, channels, 1)) {}

template <class T>
Tensor<T> ConcatFusion<T>::operator()(const Tensor<T>& enc, const Tensor<T>& dec) const {
  if (!(enc.shape() == dec.shape())) {
    throw DimensionError("skip: encoder " + enc.shape().str() + " vs decoder " + dec.shape().str());
  }
  return reduce(concat_channels<T>({enc, dec}));
}

template <class T>
AgfFusion<T>::AgfFusion(ParamStore<T>& ps, const std::string& prefix, AgfConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.channels;
  const int sw = cfg_.resolved_spatial_width();
  reduce = make_conv(ps, prefix + ".spatial.reduce", 2 * c, sw, 1);
  norm = make_norm(ps, prefix + ".spatial.gn", sw, NormKind::group, cfg_.gn_groups, T(1e-5));
  dw = make_depthwise(ps, prefix + ".spatial.dw", sw, 3);
  conv3 = make_conv(ps, prefix + ".spatial.conv3", sw, sw, 3);
  expand = make_conv(ps, prefix + ".spatial.expand", sw, c, 1);
  se_squeeze = make_linear(ps, prefix + ".channel.squeeze", 2 * c, (2 * c) / cfg_.se_reduction);
  se_excite = make_linear(ps, prefix + ".channel.excite", (2 * c) / cfg_.se_reduction, c);
  out = make_conv(ps, prefix + ".out", 2 * c, c, 1);
}

template <class T>
Tensor<T> AgfFusion<T>::spatial_gate_map(const Tensor<T>& f_cat) const {
  if (f_cat.shape().c != 2 * cfg_.channels) {
    throw ConfigError("agf: expected " + std::to_string(2 * cfg_.channels) + " concatenated channels, got " +
                      f_cat.shape().str());
  }
  const Tensor<T> s_prime = relu(norm(reduce(f_cat)));
  return expand(conv3(dw(s_prime)));
}

template <class T>
Tensor<T> AgfFusion<T>::channel_gate_vec(const Tensor<T>& f_cat) const {
  if (f_cat.shape().c != 2 * cfg_.channels) {
    throw ConfigError("agf: expected " + std::to_string(2 * cfg_.channels) + " concatenated channels, got " +
                      f_cat.shape().str());
  }
  return se_excite(relu(se_squeeze(pool(f_cat, PoolKind::gap))));
}

template <class T>
void AgfFusion<T>::check(const Tensor<T>& enc, const Tensor<T>& dec) const {
  if (!(enc.shape() == dec.shape())) {
    throw DimensionError("agf: encoder " + enc.shape().str() + " vs decoder " + dec.shape().str());
  }
  if (enc.shape().c != cfg_.channels) {
    throw ConfigError("agf: expected " + std::to_string(cfg_.channels) + " channels, got " + enc.shape().str());
  }
}

template <class T>
Tensor<T> AgfFusion<T>::mask(const Tensor<T>& enc, const Tensor<T>& dec) const {
  check(enc, dec);
  const Tensor<T> f_cat = concat_channels<T>({enc, dec});
  return sigmoid(add(spatial_gate_map(f_cat), channel_gate_vec(f_cat)));
}

template <class T>
Tensor<T> AgfFusion<T>::fuse(const Tensor<T>& enc, const Tensor<T>& dec, Tensor<T>* mask_out) const {
  const Tensor<T> a = mask(enc, dec);
  if (mask_out != nullptr) *mask_out = a;
  return gelu(out(concat_channels<T>({mul(enc, a), dec})));
}

template <class T>
Tensor<T> AgfFusion<T>::operator()(const Tensor<T>& enc, const Tensor<T>& dec) const {
  return fuse(enc, dec, nullptr);
}

template class ConcatFusion<float>;
template class ConcatFusion<double>;
template class AgfFusion<float>;
template class AgfFusion<double>;

}  // namespace dacg
