// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace dacg::fft {

namespace {

void radix2(std::span<cplx> a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        // Twiddles evaluated directly rather than by recurrence.
        const cplx wk = std::polar(1.0, ang * static_cast<double>(k));
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * wk;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

struct BluesteinPlan {
  std::size_t m = 0;
  std::vector<cplx> chirp;      // e^{sign * -i pi k^2 / n}, forward sign
  std::vector<cplx> kernel_ft;  // FFT of the conjugate chirp, padded to m
};

const BluesteinPlan& bluestein_plan(std::size_t n, int sign) {
  static std::mutex mu;
  static std::map<std::pair<std::size_t, int>, BluesteinPlan> cache;
  std::lock_guard lock(mu);
  auto [it, inserted] = cache.try_emplace({n, sign});
  BluesteinPlan& plan = it->second;
  if (!inserted) return plan;

  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  plan.m = m;
  plan.chirp.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small for large k.
    const std::size_t k2 = (k * k) % (2 * n);
    const double ang = sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    plan.chirp[k] = std::polar(1.0, ang);
  }
  plan.kernel_ft.assign(m, cplx(0.0, 0.0));
  plan.kernel_ft[0] = std::conj(plan.chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    plan.kernel_ft[k] = std::conj(plan.chirp[k]);
    plan.kernel_ft[m - k] = std::conj(plan.chirp[k]);
  }
  radix2(plan.kernel_ft, -1);
  return plan;
}

void bluestein(std::span<cplx> a, int sign) {
  const std::size_t n = a.size();
  const BluesteinPlan& plan = bluestein_plan(n, sign);
  std::vector<cplx> buf(plan.m, cplx(0.0, 0.0));
  for (std::size_t k = 0; k < n; ++k) buf[k] = a[k] * plan.chirp[k];
  radix2(buf, -1);
  for (std::size_t k = 0; k < plan.m; ++k) buf[k] *= plan.kernel_ft[k];
  radix2(buf, +1);
  const double inv_m = 1.0 / static_cast<double>(plan.m);
  for (std::size_t k = 0; k < n; ++k) a[k] = buf[k] * inv_m * plan.chirp[k];
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void transform(std::span<cplx> data, int sign) {
  if (data.size() <= 1) return;
  if (is_power_of_two(data.size())) {
    radix2(data, sign);
  } else {
    bluestein(data, sign);
  }
}

void transform_2d(std::span<cplx> plane, int h, int w, int sign) {
  for (int y = 0; y < h; ++y) transform(plane.subspan(static_cast<std::size_t>(y) * w, w), sign);
  std::vector<cplx> col(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = plane[static_cast<std::size_t>(y) * w + x];
    transform(col, sign);
    for (int y = 0; y < h; ++y) plane[static_cast<std::size_t>(y) * w + x] = col[y];
  }
}

}  // namespace dacg::fft
