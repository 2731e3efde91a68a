// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dacg/rng.hpp"

namespace dacg {

namespace {

template <class F>
double ridders(const F& at, double h) {
  constexpr int kTab = 10;
  constexpr double kCon = 1.4, kCon2 = kCon * kCon, kSafe = 2.0;
  double a[kTab][kTab];
  a[0][0] = (at(h) - at(-h)) / (2.0 * h);
  double best = a[0][0];
  double err = INFINITY;
  for (int i = 1; i < kTab; ++i) {
    h /= kCon;
    a[0][i] = (at(h) - at(-h)) / (2.0 * h);
    double fac = kCon2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
      fac *= kCon2;
      const double e = std::max(std::abs(a[j][i] - a[j - 1][i]), std::abs(a[j][i] - a[j - 1][i - 1]));
      if (e <= err) {
        err = e;
        best = a[j][i];
      }
    }
    if (std::abs(a[i][i] - a[i - 1][i - 1]) >= kSafe * err) break;
  }
  return best;
}

template <class F>
double fourth_order(const F& at, double h) {
  return (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
}

// Fourth-order estimates on steps h, h/sqrt(10), ...; returns the smaller-step
// member of the adjacent pair whose disagreement plus rounding bound
// (1.5 eps_mach |f| / h) is least.
template <class F>
double plateau(const F& at, double h) {
  constexpr int kLevels = 8;
  const double shrink = std::sqrt(10.0);
  const double f0 = std::abs(at(0.0));
  double prev = fourth_order(at, h);
  double best = prev, best_err = INFINITY;
  for (int i = 1; i < kLevels; ++i) {
    h /= shrink;
    const double cur = fourth_order(at, h);
    const double err = std::abs(cur - prev) + 1.5 * std::numeric_limits<double>::epsilon() * f0 / h;
    if (err < best_err) {
      best_err = err;
      best = cur;
    }
    prev = cur;
  }
  return best;
}

}  // namespace

GradCheckReport finite_diff_check(const std::function<Tensor<double>()>& f,
                                  std::vector<Tensor<double>> wrt, double eps,
                                  std::size_t max_samples, std::uint64_t sample_seed, Stencil stencil) {
  for (auto& t : wrt) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  const Tensor<double> loss = f();
  if (loss.numel() != 1) throw UsageError("finite_diff_check: f must return a scalar, got " + loss.shape().str());
  loss.backward();

  std::vector<std::vector<double>> auto_grads;
  auto_grads.reserve(wrt.size());
  for (const auto& t : wrt) auto_grads.push_back(t.grad());

  std::vector<std::pair<std::size_t, std::size_t>> sites;
  std::size_t total = 0;
  for (const auto& t : wrt) total += t.numel();
  if (max_samples == 0 || max_samples >= total) {
    for (std::size_t k = 0; k < wrt.size(); ++k)
      for (std::size_t i = 0; i < wrt[k].numel(); ++i) sites.emplace_back(k, i);
  } else {
    Rng rng(sample_seed);
    for (std::size_t s = 0; s < max_samples; ++s) {
      std::size_t flat = rng.below(total);
      std::size_t k = 0;
      while (flat >= wrt[k].numel()) flat -= wrt[k++].numel();
      sites.emplace_back(k, flat);
    }
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  for (const auto& [k, i] : sites) {
    double& v = wrt[k].values()[i];
    const double saved = v;
    const auto at = [&](double offset) {
      v = saved + offset;
      return f().item();
    };
    double numeric = 0.0;
    if (stencil == Stencil::second_order) {
      numeric = (at(eps) - at(-eps)) / (2.0 * eps);
    } else if (stencil == Stencil::ridders) {
      numeric = ridders(at, eps);
    } else if (stencil == Stencil::plateau) {
      numeric = plateau(at, eps);
    } else {
      numeric = fourth_order(at, eps);
    }
    v = saved;
    const double analytic = auto_grads[k][i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_error || report.checked == 1) {
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (rel >= report.max_rel_error) {
        report.worst_tensor = k;
        report.worst_index = i;
        report.worst_autodiff = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

double finite_diff_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                         const Tensor<double>& x, double eps) {
  Tensor<double> input = x;
  return finite_diff_check([&] { return f(input); }, {input}, eps).max_rel_error;
}

}  // namespace dacg
