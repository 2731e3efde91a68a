// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "dacg/ops.hpp"
#include "dacg/param_store.hpp"

namespace dacg {

template <class T>
struct Conv2d {
  Tensor<T> weight;
  Tensor<T> bias;  // undefined when the layer has no bias
  int stride = 1;
  int padding = 0;
  int groups = 1;

  Tensor<T> operator()(const Tensor<T>& x) const {
    return conv2d(x, weight, bias.defined() ? &bias : nullptr, stride, padding, groups);
  }
  /// Zeroes weight and bias in place.
  void zero() {
    std::fill(weight.values().begin(), weight.values().end(), T(0));
    if (bias.defined()) std::fill(bias.values().begin(), bias.values().end(), T(0));
  }
};

/// "Same" padding (k/2) convolution with fan-in uniform weights and zero bias.
template <class T>
Conv2d<T> make_conv(ParamStore<T>& ps, const std::string& name, int c_in, int c_out, int k, int groups = 1,
                    bool bias = true) {
  if (groups < 1 || c_in % groups != 0 || c_out % groups != 0) {
    throw ConfigError(name + ": groups=" + std::to_string(groups) + " must divide " + std::to_string(c_in) +
                      " and " + std::to_string(c_out));
  }
  Conv2d<T> conv;
  const int fan_in = (c_in / groups) * k * k;
  conv.weight = ps.add(name + ".weight", Shape{c_out, c_in / groups, k, k}, Init::fan_in_uniform, fan_in);
  if (bias) conv.bias = ps.add(name + ".bias", Shape{c_out, 1, 1, 1}, Init::zeros);
  conv.padding = k / 2;
  conv.groups = groups;
  return conv;
}

template <class T>
Conv2d<T> make_depthwise(ParamStore<T>& ps, const std::string& name, int channels, int k, bool bias = true) {
  return make_conv(ps, name, channels, channels, k, channels, bias);
}

template <class T>
struct Linear {
  Tensor<T> weight;  // (d_out, d_in, 1, 1)
  Tensor<T> bias;

  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias.defined() ? &bias : nullptr); }
  void zero() {
    std::fill(weight.values().begin(), weight.values().end(), T(0));
    if (bias.defined()) std::fill(bias.values().begin(), bias.values().end(), T(0));
  }
};

template <class T>
Linear<T> make_linear(ParamStore<T>& ps, const std::string& name, int d_in, int d_out, bool bias = true) {
  Linear<T> l;
  l.weight = ps.add(name + ".weight", Shape{d_out, d_in, 1, 1}, Init::fan_in_uniform, d_in);
  if (bias) l.bias = ps.add(name + ".bias", Shape{d_out, 1, 1, 1}, Init::zeros);
  return l;
}

/// Normalization with a per-channel affine (gain 1, shift 0 at init).
template <class T>
struct Norm {
  NormKind kind = NormKind::layer;
  int groups = 1;
  T eps = T(1e-5);
  Tensor<T> weight;  // (1, c, 1, 1)
  Tensor<T> bias;

  Tensor<T> operator()(const Tensor<T>& x) const {
    return add(mul(normalize(x, kind, groups, eps), weight), bias);
  }
};

template <class T>
Norm<T> make_norm(ParamStore<T>& ps, const std::string& name, int channels, NormKind kind, int groups, T eps) {
  if (kind == NormKind::group && (groups < 1 || channels % groups != 0)) {
    throw ConfigError(name + ": " + std::to_string(channels) + " channels not divisible into " +
                      std::to_string(groups) + " groups");
  }
  Norm<T> n;
  n.kind = kind;
  n.groups = groups;
  n.eps = eps;
  n.weight = ps.add(name + ".weight", Shape{1, channels, 1, 1}, Init::ones);
  n.bias = ps.add(name + ".bias", Shape{1, channels, 1, 1}, Init::zeros);
  return n;
}

}  // namespace dacg
