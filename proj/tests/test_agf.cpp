// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <memory>

#include "dacg/agf.hpp"
#include "dacg/gradcheck.hpp"
#include "test_util.hpp"

using namespace dacg;
using dacg::testing::max_abs_diff;
using dacg::testing::probe_loss;
using dacg::testing::random_tensor;

namespace {

void fill(Tensor<double>& t, double v) { std::fill(t.values().begin(), t.values().end(), v); }

AgfConfig cfg_for(int c) {
  AgfConfig cfg;
  cfg.channels = c;
  return cfg;
}

}  // namespace

TEST_CASE("agf config") {
  CHECK(cfg_for(48).resolved_spatial_width() == 24);
  AgfConfig bad = cfg_for(6);  // S' = 3, not divisible by 4 groups
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg_for(8);
  bad.se_reduction = 32;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("agf spatial gate map") {
  ParamStore<double> ps(1);
  AgfFusion<double> agf(ps, "agf", cfg_for(8));
  for (double v : agf.spatial_gate_map(Tensor<double>(Shape{1, 16, 5, 5}, 0.0)).values()) CHECK(v == 0.0);

  const auto f = random_tensor(Shape{2, 16, 7, 6}, 2);
  const auto s = agf.spatial_gate_map(f);
  CHECK(s.shape() == Shape{2, 8, 7, 6});
  const auto sp = relu(add(mul(normalize(conv2d(f, agf.reduce.weight, &agf.reduce.bias, 1, 0, 1), NormKind::group, 4),
                               agf.norm.weight),
                           agf.norm.bias));
  const auto expect = conv2d(conv2d(conv2d(sp, agf.dw.weight, &agf.dw.bias, 1, 1, 4), agf.conv3.weight, &agf.conv3.bias,
                                    1, 1, 1),
                             agf.expand.weight, &agf.expand.bias, 1, 0, 1);
  CHECK(max_abs_diff(s.values(), expect.values()) == 0.0);
  CHECK_THROWS_AS(agf.spatial_gate_map(random_tensor(Shape{1, 8, 4, 4}, 1)), ConfigError);
}

TEST_CASE("agf channel gate") {
  ParamStore<double> ps(2);
  AgfFusion<double> agf(ps, "agf", cfg_for(8));
  // GAP of a constant-1 map is 1; squeeze gives 16 * 0.1 = 1.6 per hidden
  // unit, excite 4 * 0.25 * 1.6 - 1 = 0.6.
  fill(agf.se_squeeze.weight, 0.1);
  fill(agf.se_squeeze.bias, 0.0);
  fill(agf.se_excite.weight, 0.25);
  fill(agf.se_excite.bias, -1.0);
  const auto cv = agf.channel_gate_vec(Tensor<double>(Shape{1, 16, 3, 3}, 1.0));
  CHECK(cv.shape() == Shape{1, 8, 1, 1});
  for (double v : cv.values()) CHECK(v == doctest::Approx(0.6).epsilon(1e-12));

  // A negative squeeze output is clipped by the ReLU.
  fill(agf.se_squeeze.weight, -0.1);
  for (double v : agf.channel_gate_vec(Tensor<double>(Shape{1, 16, 3, 3}, 1.0)).values()) CHECK(v == -1.0);

  agf.se_squeeze.zero();
  agf.se_excite.zero();
  for (double v : agf.channel_gate_vec(random_tensor(Shape{2, 16, 4, 4}, 3)).values()) CHECK(v == 0.0);

  ParamStore<double> ps2(3);
  AgfFusion<double> fresh(ps2, "agf", cfg_for(8));
  const auto x = random_tensor(Shape{2, 16, 4, 4}, 4);
  const auto both = fresh.channel_gate_vec(x);
  const auto second = fresh.channel_gate_vec(Tensor<double>(
      Shape{1, 16, 4, 4}, std::vector<double>(x.values().begin() + 256, x.values().end())));
  CHECK(std::vector<double>(both.values().begin() + 8, both.values().end()) == second.values());
}

TEST_CASE("agf mask and fuse") {
  ParamStore<double> ps(4);
  AgfFusion<double> agf(ps, "agf", cfg_for(8));
  const auto enc = random_tensor(Shape{2, 8, 6, 6}, 5);
  const auto dec = random_tensor(Shape{2, 8, 6, 6}, 6);
  Tensor<double> a;
  const auto out = agf.fuse(enc, dec, &a);
  CHECK(out.shape() == enc.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) {
    CHECK(a.values()[i] > 0.0);
    CHECK(a.values()[i] < 1.0);
    CHECK(std::abs(enc.values()[i] * a.values()[i]) < std::abs(enc.values()[i]));
  }
  const auto expect = gelu(conv2d(concat_channels<double>({mul(enc, a), dec}), agf.out.weight, &agf.out.bias, 1, 0, 1));
  CHECK(max_abs_diff(out.values(), expect.values()) == 0.0);

  agf.expand.zero();
  fill(agf.expand.bias, 20.0);
  agf.se_excite.zero();
  for (double v : agf.mask(enc, dec).values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-8));
  const auto saturated = agf(enc, dec);
  const auto raw = gelu(conv2d(concat_channels<double>({enc, dec}), agf.out.weight, &agf.out.bias, 1, 0, 1));
  CHECK(max_abs_diff(saturated.values(), raw.values()) <= 1e-6);

  CHECK_THROWS_AS(agf(enc, random_tensor(Shape{2, 8, 6, 5}, 1)), DimensionError);
}

TEST_CASE("agf gradient") {
  ParamStore<double> ps(5);
  AgfFusion<double> agf(ps, "agf", cfg_for(8));
  const auto enc = random_tensor(Shape{1, 8, 5, 5}, 7, -1.0, 1.0, true);
  const auto dec = random_tensor(Shape{1, 8, 5, 5}, 8, -1.0, 1.0, true);
  const auto rep =
      finite_diff_check([&] { return probe_loss(agf(enc, dec)); }, {enc, dec}, 0.1, 0, 0, Stencil::plateau);
  CHECK(rep.max_rel_error <= 1e-4);

  // Parameters too; the ReLU after the norm puts kinks within wide steps.
  std::vector<Tensor<double>> wrt{enc, dec};
  for (const auto& e : ps.entries()) wrt.push_back(e.second);
  const auto all = finite_diff_check([&] { return probe_loss(agf(enc, dec)); }, wrt, 0.1, 0, 0, Stencil::plateau);
  CHECK(all.max_rel_error <= 1e-4);
  CHECK(all.checked == 2 * enc.numel() + ps.count());
}

TEST_CASE("skip fusions are interchangeable") {
  ParamStore<float> ps(6);
  std::vector<std::unique_ptr<SkipFusion<float>>> fusions;
  fusions.push_back(std::make_unique<AgfFusion<float>>(ps, "agf", AgfConfig{16}));
  fusions.push_back(std::make_unique<ConcatFusion<float>>(ps, "cat", 16));
  const auto enc = random_tensor<float>(Shape{1, 16, 4, 4}, 1);
  const auto dec = random_tensor<float>(Shape{1, 16, 4, 4}, 2);
  for (const auto& f : fusions) CHECK((*f)(enc, dec).shape() == enc.shape());
}
