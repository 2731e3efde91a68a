// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "dacg/cgdm.hpp"
#include "dacg/gradcheck.hpp"
#include "test_util.hpp"

using namespace dacg;
using dacg::testing::max_abs_diff;
using dacg::testing::probe_loss;
using dacg::testing::random_tensor;

namespace {

void fill(Tensor<double>& t, double v) { std::fill(t.values().begin(), t.values().end(), v); }

void set_identity_mix(Cgdm<double>& m) {
  Tensor<double>& w = m.spectral_mix.weight;
  fill(w, 0.0);
  const int c = w.shape().n;
  for (int i = 0; i < c; ++i) w.values()[i * c + i] = 1.0;
}

void open_gate(Cgdm<double>& m, double pre) {
  m.spectral_gate.zero();
  fill(m.spectral_gate.bias, pre);
}

}  // namespace

TEST_CASE("cgdm spatial branch") {
  ParamStore<double> ps(1);
  Cgdm<double> m(ps, "cgdm", CgdmConfig{8, 16});
  for (double v : m.spatial_branch(Tensor<double>(Shape{1, 8, 8, 8}, 0.0)).values()) CHECK(v == 0.0);
  const auto x = random_tensor(Shape{2, 8, 6, 5}, 2);
  const auto y = m.spatial_branch(x);
  CHECK(y.shape() == x.shape());
  const auto expect = conv2d(gelu(conv2d(x, m.spatial_dw.weight, &m.spatial_dw.bias, 1, 1, 8)), m.spatial_pw.weight,
                             &m.spatial_pw.bias, 1, 0, 1);
  CHECK(max_abs_diff(y.values(), expect.values()) == 0.0);
}

TEST_CASE("cgdm frequency branch round trip and shutoff") {
  ParamStore<double> ps(2);
  Cgdm<double> m(ps, "cgdm", CgdmConfig{4, 8});
  CHECK(m.spectral_mix.bias.defined() == false);
  set_identity_mix(m);
  const auto p = random_tensor(Shape{2, 8, 1, 1}, 3);
  for (Shape s : {Shape{2, 4, 8, 8}, Shape{2, 4, 6, 10}, Shape{2, 4, 7, 7}}) {
    const auto f = random_tensor(s, 4);
    open_gate(m, 20.0);
    Tensor<double> mask;
    CHECK(max_abs_diff(m.freq_branch(f, p, &mask).values(), f.values()) <= 1e-5);
    CHECK(mask.shape() == Shape{2, 8, 1, 1});
    open_gate(m, -20.0);
    for (double v : m.freq_branch(f, p).values()) CHECK(std::abs(v) <= 1e-5);
  }
}

TEST_CASE("cgdm mask range") {
  ParamStore<double> ps(3);
  Cgdm<double> m(ps, "cgdm", CgdmConfig{4, 8});
  Tensor<double> mask;
  m.freq_branch(random_tensor(Shape{3, 4, 4, 4}, 5), random_tensor(Shape{3, 8, 1, 1}, 6, -3.0, 3.0), &mask);
  for (double v : mask.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("cgdm spectral path is linear for a fixed prompt") {
  ParamStore<double> ps(4);
  Cgdm<double> m(ps, "cgdm", CgdmConfig{4, 8});
  const auto p = random_tensor(Shape{1, 8, 1, 1}, 7);
  const auto a = random_tensor(Shape{1, 4, 6, 10}, 8);
  const auto b = random_tensor(Shape{1, 4, 6, 10}, 9);
  const auto fa = m.freq_branch(a, p);
  const auto fb = m.freq_branch(b, p);
  CHECK(max_abs_diff(m.freq_branch(scale(a, 3.0), p).values(), scale(fa, 3.0).values()) <= 1e-6);
  CHECK(max_abs_diff(m.freq_branch(add(a, b), p).values(), add(fa, fb).values()) <= 1e-6);
}

TEST_CASE("cgdm fuse") {
  ParamStore<double> ps(5);
  Cgdm<double> m(ps, "cgdm", CgdmConfig{8, 16});
  const auto f = random_tensor(Shape{1, 8, 5, 7}, 10);
  const auto p = random_tensor(Shape{1, 16, 1, 1}, 11);
  CHECK(m(f, p).shape() == f.shape());
  CHECK(max_abs_diff(m(f, p).values(), f.values()) > 1e-6);
  m.fuse.zero();
  CHECK(m(f, p).values() == f.values());
  CHECK_THROWS_AS(m.freq_branch(random_tensor(Shape{1, 3, 4, 4}, 1), p), ConfigError);
}

TEST_CASE("cgdm gradient") {
  ParamStore<double> ps(6);
  Cgdm<double> m(ps, "cgdm", CgdmConfig{4, 6});
  const auto f = random_tensor(Shape{1, 4, 6, 5}, 12, -1.0, 1.0, true);
  const auto p = random_tensor(Shape{1, 6, 1, 1}, 13, -1.0, 1.0, true);
  std::vector<Tensor<double>> wrt{f, p};
  for (const auto& e : ps.entries()) wrt.push_back(e.second);
  const auto rep = finite_diff_check([&] { return probe_loss(m(f, p)); }, wrt, 0.1, 0, 0, Stencil::plateau);
  CHECK(rep.max_rel_error <= 1e-4);
}
