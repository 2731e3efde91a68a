// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dacg::fft {

using cplx = std::complex<double>;

/// In-place unnormalized 1-D DFT. sign = -1 computes sum x_k e^{-2 pi i jk/n},
/// sign = +1 the conjugate kernel. Radix-2 for powers of two, Bluestein's
/// chirp-z otherwise.
void transform(std::span<cplx> data, int sign);

/// In-place unnormalized 2-D DFT of a row-major h x w plane.
void transform_2d(std::span<cplx> plane, int h, int w, int sign);

bool is_power_of_two(std::size_t n);

}  // namespace dacg::fft
