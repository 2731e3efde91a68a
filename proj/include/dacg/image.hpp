// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dacg/tensor.hpp"

namespace dacg {

/// h x w x 3 interleaved RGB in [0, 1].
struct ImageBuffer {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;
  std::string source_path;

  ImageBuffer() = default;
  ImageBuffer(int h, int w, float fill = 0.0f);

  float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::size_t size() const { return pixels.size(); }
  void clamp();
};

/// Binary PPM (P6) with maxval 255. Comments ('#' to end of line) are
/// accepted in the header. Errors carry the byte offset of the problem.
ImageBuffer parse_ppm(std::string_view bytes);
ImageBuffer load_ppm(const std::filesystem::path& path);
/// Values are clamped to [0, 1] and rounded to the nearest 8-bit level.
std::string encode_ppm(const ImageBuffer& img);
void save_ppm(const std::filesystem::path& path, const ImageBuffer& img);

/// 10 log10(1 / MSE) for [0, 1] data, capped at kPsnrCap when MSE is zero
/// or the value would exceed the cap.
inline constexpr double kPsnrCap = 100.0;
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Mean single-scale SSIM over all valid 11x11 windows (Gaussian weights,
/// sigma 1.5, K1 0.01, K2 0.03, dynamic range 1), averaged over channels.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

template <class T>
Tensor<T> to_tensor(const std::vector<ImageBuffer>& images);
template <class T>
Tensor<T> to_tensor(const ImageBuffer& image) { return to_tensor<T>(std::vector<ImageBuffer>{image}); }
/// Extracts batch item n; values are clamped to [0, 1].
template <class T>
ImageBuffer to_image(const Tensor<T>& t, int n = 0);

/// Mirror padding (edge pixel not repeated) on the bottom/right so both
/// dimensions become multiples of m.
ImageBuffer reflect_pad(const ImageBuffer& img, int m);
ImageBuffer crop(const ImageBuffer& img, int y0, int x0, int h, int w);
ImageBuffer flip_horizontal(const ImageBuffer& img);

}  // namespace dacg
