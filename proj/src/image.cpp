// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

namespace dacg {

namespace fs = std::filesystem;

ImageBuffer::ImageBuffer(int h, int w, float fill) : height(h), width(w) {
  if (h < 0 || w < 0) throw DimensionError("image: negative size");
  pixels.assign(static_cast<std::size_t>(h) * w * 3, fill);
}

void ImageBuffer::clamp() {
  for (float& v : pixels) v = std::clamp(v, 0.0f, 1.0f);
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view b) : bytes_(b) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000) throw ParseError(std::string("ppm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("ppm: expected ") + what, start);
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string read_all(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot open '" + p.string() + "'");
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

ImageBuffer parse_ppm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ParseError("ppm: missing P6 magic", 0);
  HeaderReader r(bytes);
  r.advance(2);
  const std::size_t after_magic = r.pos();
  if (after_magic >= bytes.size() || !(std::isspace(static_cast<unsigned char>(bytes[after_magic])) || bytes[after_magic] == '#')) {
    throw ParseError("ppm: expected whitespace after magic", after_magic);
  }
  const long w = r.number("width");
  const long h = r.number("height");
  r.skip_space_and_comments();
  const std::size_t maxval_at = r.pos();
  const long maxval = r.number("maxval");
  if (maxval != 255) throw ParseError("ppm: maxval " + std::to_string(maxval) + " unsupported (only 255)", maxval_at);
  if (w < 1 || h < 1) throw ParseError("ppm: empty image", maxval_at);
  if (r.pos() >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[r.pos()]))) {
    throw ParseError("ppm: expected a single whitespace before pixel data", r.pos());
  }
  r.advance(1);
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - r.pos() < need) {
    throw ParseError("ppm: truncated pixel data, need " + std::to_string(need) + " bytes", bytes.size());
  }
  ImageBuffer img(static_cast<int>(h), static_cast<int>(w));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + r.pos();
  for (std::size_t i = 0; i < need; ++i) img.pixels[i] = static_cast<float>(p[i]) / 255.0f;
  return img;
}

ImageBuffer load_ppm(const fs::path& path) {
  ImageBuffer img = parse_ppm(read_all(path));
  img.source_path = path.string();
  return img;
}

std::string encode_ppm(const ImageBuffer& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (float v : img.pixels) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0f))));
  }
  return out;
}

void save_ppm(const fs::path& path, const ImageBuffer& img) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  const std::string bytes = encode_ppm(img);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing '" + path.string() + "'");
}

namespace {

void check_same(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
  if (a.height != b.height || a.width != b.width) {
    throw DimensionError(std::string(what) + ": image sizes differ (" + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) + ")");
  }
}

std::array<double, 11> gaussian_window() {
  std::array<double, 11> g{};
  double s = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    s += g[i];
  }
  for (double& v : g) v /= s;
  return g;
}

// Separable valid-mode filtering of one channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::array<double, 11>& g) {
  const int oh = h - 10, ow = w - 10;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < 11; ++k) acc += g[k] * plane[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < 11; ++k) acc += g[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  check_same(a, b, "psnr");
  if (a.size() == 0) throw DimensionError("psnr: empty image");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  check_same(a, b, "ssim");
  if (a.height < 11 || a.width < 11) {
    throw DimensionError("ssim: image must be at least 11x11, got " + std::to_string(a.height) + "x" +
                         std::to_string(a.width));
  }
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto g = gaussian_window();
  const int h = a.height, w = a.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.pixels[i * 3 + c];
      y[i] = b.pixels[i * 3 + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, g), my = filter_valid(y, h, w, g);
    const auto sxx = filter_valid(xx, h, w, g), syy = filter_valid(yy, h, w, g), sxy = filter_valid(xy, h, w, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

template <class T>
Tensor<T> to_tensor(const std::vector<ImageBuffer>& images) {
  if (images.empty()) throw UsageError("to_tensor: no images");
  const int h = images[0].height, w = images[0].width;
  Tensor<T> t(Shape{static_cast<int>(images.size()), 3, h, w}, T(0));
  auto& v = t.values();
  for (std::size_t n = 0; n < images.size(); ++n) {
    check_same(images[0], images[n], "to_tensor");
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) v[((n * 3 + c) * h + y) * w + x] = static_cast<T>(images[n].at(y, x, c));
  }
  return t;
}

template <class T>
ImageBuffer to_image(const Tensor<T>& t, int n) {
  const Shape s = t.shape();
  if (s.c != 3) throw DimensionError("to_image: expected 3 channels, got " + s.str());
  if (n < 0 || n >= s.n) throw UsageError("to_image: batch index out of range");
  ImageBuffer img(s.h, s.w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) img.at(y, x, c) = static_cast<float>(t.at(n, c, y, x));
  img.clamp();
  return img;
}

template Tensor<float> to_tensor(const std::vector<ImageBuffer>&);
template Tensor<double> to_tensor(const std::vector<ImageBuffer>&);
template ImageBuffer to_image(const Tensor<float>&, int);
template ImageBuffer to_image(const Tensor<double>&, int);

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

ImageBuffer reflect_pad(const ImageBuffer& img, int m) {
  if (m < 1) throw UsageError("reflect_pad: multiple must be >= 1");
  const int h = (img.height + m - 1) / m * m, w = (img.width + m - 1) / m * m;
  ImageBuffer out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(reflect(y, img.height), reflect(x, img.width), c);
  out.source_path = img.source_path;
  return out;
}

ImageBuffer crop(const ImageBuffer& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h < 0 || w < 0 || y0 + h > img.height || x0 + w > img.width) {
    throw DimensionError("crop: window out of bounds");
  }
  ImageBuffer out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  out.source_path = img.source_path;
  return out;
}

ImageBuffer flip_horizontal(const ImageBuffer& img) {
  ImageBuffer out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  out.source_path = img.source_path;
  return out;
}

}  // namespace dacg
