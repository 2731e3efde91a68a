// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/gradcheck_suite.hpp"

#include <algorithm>
#include <utility>

#include "dacg/agf.hpp"
#include "dacg/caga.hpp"
#include "dacg/cgdm.hpp"
#include "dacg/dam.hpp"
#include "dacg/errors.hpp"
#include "dacg/gradcheck.hpp"
#include "dacg/model.hpp"
#include "dacg/ops.hpp"
#include "dacg/rng.hpp"

namespace dacg {
namespace {

using D = Tensor<double>;
using Fn = std::function<D(const D&)>;

constexpr double kModuleTolerance = 1e-4;
constexpr double kModelTolerance = 1e-3;

D uniform(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0, bool grad = false) {
  Rng rng(seed);
  std::vector<double> v(s.numel());
  for (auto& x : v) x = rng.uniform(lo, hi);
  return D(s, std::move(v), grad);
}

// Weighted sum with fixed weights so every output element matters.
D probe(const D& y, std::uint64_t seed = 99) { return sum(mul(y, uniform(y.shape(), seed, 0.5, 1.5))); }

struct Target {
  std::string group;
  std::string name;
  double threshold;
  // Returns the report for one seed.
  std::function<GradCheckReport(std::uint64_t)> run;
  bool seeded = true;
};

GradCheckReport single(const Fn& f, const D& x) {
  GradCheckReport r;
  r.max_rel_error = finite_diff_check([&](const D& t) { return probe(f(t)); }, x);
  r.checked = x.numel();
  return r;
}

template <class Store>
std::vector<D> with_params(std::vector<D> wrt, const Store& ps) {
  for (const auto& e : ps.entries()) wrt.push_back(e.second);
  return wrt;
}

// Modules mix structurally zero gradients (which want wide steps) with
// normalizations of near-constant vectors (which need narrow ones).
GradCheckReport wide(const std::function<D()>& f, std::vector<D> wrt, std::size_t samples = 0,
                     std::uint64_t seed = 0) {
  return finite_diff_check(f, std::move(wrt), 0.1, samples, seed, Stencil::plateau);
}

void add_primitives(std::vector<Target>& out) {
  const Shape s{2, 4, 8, 8};
  auto prim = [&](std::string name, std::function<Fn(std::uint64_t)> make) {
    out.push_back({"primitives", std::move(name), kModuleTolerance, [s, make](std::uint64_t seed) {
                     return single(make(seed), uniform(s, seed));
                   }});
  };
  auto fixed = [&](std::string name, Fn f) {
    prim(std::move(name), [f](std::uint64_t) { return f; });
  };
  prim("conv2d", [](std::uint64_t seed) -> Fn {
    auto w = uniform(Shape{3, 4, 3, 3}, seed + 100), b = uniform(Shape{3, 1, 1, 1}, seed + 102);
    return [w, b](const D& t) { return conv2d(t, w, &b, 1, 1, 1); };
  });
  prim("conv2d_stride2", [](std::uint64_t seed) -> Fn {
    auto w = uniform(Shape{3, 4, 3, 3}, seed + 100);
    return [w](const D& t) { return conv2d(t, w, nullptr, 2, 1, 1); };
  });
  prim("conv2d_depthwise", [](std::uint64_t seed) -> Fn {
    auto w = uniform(Shape{4, 1, 5, 5}, seed + 101);
    return [w](const D& t) { return conv2d(t, w, nullptr, 1, 2, 4); };
  });
  prim("linear", [](std::uint64_t seed) -> Fn {
    auto w = uniform(Shape{5, 4, 1, 1}, seed + 104), b = uniform(Shape{5, 1, 1, 1}, seed + 105);
    return [w, b](const D& t) { return linear(pool(t, PoolKind::gap), w, &b); };
  });
  fixed("gelu", [](const D& t) { return gelu(t); });
  fixed("relu", [](const D& t) { return relu(t); });
  fixed("sigmoid", [](const D& t) { return sigmoid(t); });
  fixed("exp", [](const D& t) { return dacg::exp(t); });
  fixed("abs", [](const D& t) { return dacg::abs(t); });
  fixed("square", [](const D& t) { return square(t); });
  fixed("softmax", [](const D& t) { return softmax(scale(t, 3.0)); });
  fixed("l2_normalize", [](const D& t) { return l2_normalize(t); });
  fixed("layer_norm", [](const D& t) { return normalize(t, NormKind::layer); });
  fixed("group_norm", [](const D& t) { return normalize(t, NormKind::group, 2); });
  fixed("gap", [](const D& t) { return pool(t, PoolKind::gap); });
  fixed("mean_std", [](const D& t) { return pool(t, PoolKind::mean_std); });
  prim("mul_broadcast", [](std::uint64_t seed) -> Fn {
    auto row = uniform(Shape{1, 4, 1, 8}, seed + 103, 0.5, 2.0);
    return [row](const D& t) { return mul(t, row); };
  });
  prim("div_broadcast", [](std::uint64_t seed) -> Fn {
    auto row = uniform(Shape{1, 4, 1, 8}, seed + 103, 0.5, 2.0);
    return [row](const D& t) { return add(div(t, row), div(row, add_scalar(square(t), 1.0))); };
  });
  fixed("matmul", [](const D& t) { return matmul(t, t, false, true); });
  fixed("concat_slice", [](const D& t) { return concat_channels<double>({slice_channels(t, 1, 2), square(t)}); });
  fixed("reshape", [](const D& t) { return square(reshape(t, Shape{2, 1, 16, 16})); });
  fixed("unshuffle", [](const D& t) { return resample(t, ResampleKind::unshuffle, 2); });
  fixed("shuffle", [](const D& t) { return resample(t, ResampleKind::shuffle, 2); });
  fixed("fft2d", [](const D& t) {
    const auto z = fft2d(t);
    return concat_channels<double>({z.real, z.imag});
  });
  fixed("ifft2d", [](const D& t) { return ifft2d(ComplexMap<double>{t, square(t)}); });
  fixed("spectral_transform", [](const D& t) { return spectral_transform(t, false); });
  fixed("mean", [](const D& t) { return scale(mean(square(t)), 100.0); });
}

void add_modules(std::vector<Target>& out) {
  out.push_back({"dam", "dam", kModuleTolerance, [](std::uint64_t seed) {
                   ParamStore<double> ps(seed);
                   Dam<double> dam(ps, "dam", DamConfig::for_width(4, 8));
                   const auto x = uniform(Shape{2, 4, 8, 8}, seed + 10, -1.0, 1.0, true);
                   return wide(
                       [&] {
                         const auto ctx = dam(x);
                         D total = probe(ctx.global_feature);
                         for (const auto& p : ctx.layer_prompts) total = add(total, probe(p, seed + 1));
                         return total;
                       },
                       with_params({x}, ps));
                 }});
  out.push_back({"caga", "caga", kModuleTolerance, [](std::uint64_t seed) {
                   ParamStore<double> ps(seed);
                   BlockConfig cfg;
                   cfg.caga.channels = 4;
                   cfg.caga.heads = 2;
                   cfg.caga.prompt_dim = 6;
                   TransformerBlock<double> blk(ps, "caga", cfg);
                   // Move theta off zero so the temperature path is not at 1.
                   blk.attn.theta_base.values() = {0.3, -0.2};
                   const auto x = uniform(Shape{2, 4, 6, 6}, seed + 10, -1.0, 1.0, true);
                   const auto p = uniform(Shape{2, 6, 1, 1}, seed + 11, -1.0, 1.0, true);
                   return wide([&] { return probe(blk(x, &p)); }, with_params({x, p}, ps));
                 }});
  out.push_back({"cgdm", "cgdm", kModuleTolerance, [](std::uint64_t seed) {
                   ParamStore<double> ps(seed);
                   Cgdm<double> m(ps, "cgdm", CgdmConfig{4, 6});
                   const auto f = uniform(Shape{2, 4, 6, 5}, seed + 10, -1.0, 1.0, true);
                   const auto p = uniform(Shape{2, 6, 1, 1}, seed + 11, -1.0, 1.0, true);
                   return wide([&] { return probe(m(f, p)); }, with_params({f, p}, ps));
                 }});
  out.push_back({"agf", "agf", kModuleTolerance, [](std::uint64_t seed) {
                   ParamStore<double> ps(seed);
                   AgfConfig cfg;
                   cfg.channels = 4;
                   cfg.gn_groups = 2;
                   AgfFusion<double> agf(ps, "agf", cfg);
                   const auto enc = uniform(Shape{2, 4, 6, 6}, seed + 10, -1.0, 1.0, true);
                   const auto dec = uniform(Shape{2, 4, 6, 6}, seed + 11, -1.0, 1.0, true);
                   return wide([&] { return probe(agf(enc, dec)); }, with_params({enc, dec}, ps));
                 }});
}

}  // namespace

std::vector<std::string> grad_check_groups() { return {"primitives", "dam", "caga", "cgdm", "agf", "model"}; }

std::vector<GradCheckResult> run_grad_check_suite(const GradCheckSuiteOptions& opts,
                                                  const std::function<void(const GradCheckResult&)>& on_result) {
  if (opts.seeds < 1) throw ConfigError("grad-check needs at least one seed");
  std::vector<Target> targets;
  add_primitives(targets);
  add_modules(targets);
  const std::size_t samples = opts.model_samples;
  targets.push_back({"model", "tiny_model", kModelTolerance,
                     [samples](std::uint64_t seed) {
                       ModelConfig cfg = ModelConfig::preset("tiny");
                       cfg.seed = seed;
                       Model<double> m(cfg);
                       const auto x = uniform(Shape{1, 3, 16, 16}, seed + 5, 0.0, 1.0);
                       std::vector<D> wrt;
                       for (const auto& e : m.params().entries()) wrt.push_back(e.second);
                       return wide([&] { return probe(m(x)); }, wrt, samples, seed + 7);
                     },
                     false});

  if (!opts.only.empty()) {
    std::erase_if(targets, [&](const Target& t) { return t.group != opts.only && t.name != opts.only; });
    if (targets.empty()) throw ConfigError("--only '" + opts.only + "' matches no grad-check target");
  }

  std::vector<GradCheckResult> results;
  for (const auto& t : targets) {
    GradCheckResult r{t.group, t.name, 0.0, t.threshold, 0};
    const int runs = t.seeded ? opts.seeds : 1;
    for (int k = 0; k < runs; ++k) {
      const auto rep = t.run(opts.base_seed + 1 + static_cast<std::uint64_t>(k));
      r.max_rel_error = std::max(r.max_rel_error, rep.max_rel_error);
      r.checked += rep.checked;
    }
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace dacg
