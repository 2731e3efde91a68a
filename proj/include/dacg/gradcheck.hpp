// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "dacg/tensor.hpp"

namespace dacg {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Location of the worst element: which tensor, which flat index.
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_autodiff = 0.0;
  double worst_numeric = 0.0;
};

/// Central-difference check of reverse-mode gradients at 64-bit precision.
///
/// f must build its graph from the tensors in `wrt` on every call and return
/// a scalar. Relative error per element is
///   |g_auto - g_fd| / max(|g_auto|, |g_fd|, 1e-8).
/// With max_samples > 0 only that many (tensor, index) pairs are drawn from
/// `sample_seed`; otherwise every element is checked.
/// Central-difference stencils. second_order: (f(+h) - f(-h)) / 2h.
/// fourth_order: (-f(+2h) + 8 f(+h) - 8 f(-h) + f(-2h)) / 12h, which tolerates
/// a ten times larger h for the same truncation error and so suffers less
/// from rounding in f. ridders: Ridders' polynomial extrapolation of
/// second-order estimates, starting at step eps and shrinking by 1.4; the
/// estimate with the smallest internal error bound is returned. plateau:
/// fourth-order estimates on eight steps from eps down by sqrt(10) each; the
/// adjacent pair that agrees best wins. Handles functions with curvature or
/// kinks on a scale below eps, where ridders can settle on a wrong value.
enum class Stencil { second_order, fourth_order, ridders, plateau };

GradCheckReport finite_diff_check(const std::function<Tensor<double>()>& f,
                                  std::vector<Tensor<double>> wrt, double eps = 1e-5,
                                  std::size_t max_samples = 0, std::uint64_t sample_seed = 0,
                                  Stencil stencil = Stencil::second_order);

/// Single-input form: max relative error of d f(x) / dx.
double finite_diff_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                         const Tensor<double>& x, double eps = 1e-5);

}  // namespace dacg
