// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/evaluate.hpp"

namespace dacg {

template <class T>
ImageBuffer restore_image(const Model<T>& model, const ImageBuffer& input) {
  NoGradGuard guard;
  const ImageBuffer padded = reflect_pad(input, 8);
  ImageBuffer out = crop(to_image(model(to_tensor<T>(padded))), 0, 0, input.height, input.width);
  out.source_path = input.source_path;
  return out;
}

template <class T>
EvalSummary evaluate_pairs(const Model<T>& model, const std::vector<ImagePair>& pairs) {
  EvalSummary s;
  for (const auto& p : pairs) {
    const ImageBuffer out = restore_image(model, p.degraded);
    s.psnr_input += psnr(p.degraded, p.clean);
    s.psnr_output += psnr(out, p.clean);
    s.ssim_input += ssim(p.degraded, p.clean);
    s.ssim_output += ssim(out, p.clean);
  }
  s.count = pairs.size();
  if (s.count > 0) {
    const double n = static_cast<double>(s.count);
    s.psnr_input /= n;
    s.psnr_output /= n;
    s.ssim_input /= n;
    s.ssim_output /= n;
  }
  return s;
}

template ImageBuffer restore_image(const Model<float>&, const ImageBuffer&);
template ImageBuffer restore_image(const Model<double>&, const ImageBuffer&);
template EvalSummary evaluate_pairs(const Model<float>&, const std::vector<ImagePair>&);
template EvalSummary evaluate_pairs(const Model<double>&, const std::vector<ImagePair>&);

}  // namespace dacg
