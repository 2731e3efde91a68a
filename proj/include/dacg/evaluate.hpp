// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "dacg/degrade.hpp"
#include "dacg/image.hpp"
#include "dacg/model.hpp"

namespace dacg {

/// Pads to a multiple of 8 by reflection, runs the model without recording a
/// graph and crops back to the input size. Output is clamped to [0, 1].
template <class T>
ImageBuffer restore_image(const Model<T>& model, const ImageBuffer& input);

struct EvalSummary {
  double psnr_input = 0.0;  // degraded vs clean, mean over pairs
  double psnr_output = 0.0;
  double ssim_input = 0.0;
  double ssim_output = 0.0;
  std::size_t count = 0;
};

template <class T>
EvalSummary evaluate_pairs(const Model<T>& model, const std::vector<ImagePair>& pairs);

}  // namespace dacg
