// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string_view>
#include <type_traits>
#include <vector>

#include "dacg/tensor.hpp"

namespace dacg {

// Elementwise arithmetic. The second operand may broadcast: every extent
// must either match the first operand's or be 1 (and vice versa).
template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> scale(const Tensor<T>& a, T s);
template <class T> Tensor<T> add_scalar(const Tensor<T>& a, T s);

template <class T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <class T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <class T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }

enum class Activation { gelu, relu, sigmoid };

template <class T> Tensor<T> activation(const Tensor<T>& x, Activation kind);
template <class T> Tensor<T> gelu(const Tensor<T>& x) { return activation(x, Activation::gelu); }
template <class T> Tensor<T> relu(const Tensor<T>& x) { return activation(x, Activation::relu); }
template <class T> Tensor<T> sigmoid(const Tensor<T>& x) { return activation(x, Activation::sigmoid); }
template <class T> Tensor<T> exp(const Tensor<T>& x);
template <class T> Tensor<T> abs(const Tensor<T>& x);
template <class T> Tensor<T> square(const Tensor<T>& x);

template <class T> Tensor<T> sum(const Tensor<T>& x);
template <class T> Tensor<T> mean(const Tensor<T>& x);

/// Cross-correlation with zero padding. weight is c_out x (c_in/groups) x k x k.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const std::type_identity_t<Tensor<T>>* bias, int stride,
                 int padding, int groups);

/// x is (n, d_in, 1, 1), weight is (d_out, d_in, 1, 1); y = x W^T + b.
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const std::type_identity_t<Tensor<T>>* bias);

/// Batched product over the trailing two extents: for every (n, c),
/// op(a) [h x k] times op(b) [k x w].
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_a = false,
                 bool transpose_b = false);

/// Softmax along the last (w) axis, max-subtracted.
template <class T> Tensor<T> softmax(const Tensor<T>& x);

/// Rows along the last axis scaled to unit L2 norm; norms below eps clamp to eps.
template <class T> Tensor<T> l2_normalize(const Tensor<T>& x, T eps = T(1e-12));

enum class NormKind { layer, group };

/// Affine-free normalization. layer: over channels at each (n, y, x).
/// group: over (c/num_groups, h, w) blocks for each n.
template <class T>
Tensor<T> normalize(const Tensor<T>& x, NormKind kind, int num_groups = 1, T eps = T(1e-5));

enum class PoolKind { gap, mean_std };

/// gap -> (n, c, 1, 1); mean_std -> (n, 2c, 1, 1) with means first, then
/// population standard deviations.
template <class T> Tensor<T> pool(const Tensor<T>& x, PoolKind kind);

template <class T> Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);
template <class T> Tensor<T> slice_channels(const Tensor<T>& x, int start, int count);
template <class T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);

enum class ResampleKind { unshuffle, shuffle };

/// unshuffle: (n, c, h, w) -> (n, c r^2, h/r, w/r). Channel c*r*r + dy*r + dx
/// holds the sub-pixel (dy, dx). shuffle is the exact inverse.
template <class T> Tensor<T> resample(const Tensor<T>& x, ResampleKind kind, int r);

template <class T>
struct ComplexMap {
  Tensor<T> real;
  Tensor<T> imag;
};

/// Unnormalized forward 2-D DFT over (h, w) of every (n, c) plane.
template <class T> ComplexMap<T> fft2d(const Tensor<T>& x);
/// Inverse 2-D DFT with 1/(h w) scaling; returns the real part.
template <class T> Tensor<T> ifft2d(const ComplexMap<T>& z);

/// 2-D DFT on a stacked layout (n, 2c, h, w): channels [0, c) are real parts,
/// [c, 2c) imaginary parts. Output uses the same layout.
template <class T> Tensor<T> spectral_transform(const Tensor<T>& stacked, bool inverse);

namespace debug {
/// Test hook: perturbs the backward pass of the named primitive ("sigmoid",
/// "gelu", ...). Empty string disables.
void inject_fault(std::string_view op);
bool fault_active(std::string_view op);
}  // namespace debug

}  // namespace dacg
