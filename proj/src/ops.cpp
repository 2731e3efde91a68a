// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "dacg/fft.hpp"

namespace dacg {

namespace debug {
namespace {
std::mutex g_fault_mu;
std::string g_fault_op;
}  // namespace

void inject_fault(std::string_view op) {
  std::lock_guard lock(g_fault_mu);
  g_fault_op = std::string(op);
}

bool fault_active(std::string_view op) {
  std::lock_guard lock(g_fault_mu);
  return !g_fault_op.empty() && g_fault_op == op;
}
}  // namespace debug

namespace {

template <class T>
Node<T>& parent(Node<T>& self, std::size_t i) {
  return *self.parents[i];
}

// ---------------------------------------------------------------------------
// Broadcasting binary ops

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  auto dim = [&](int x, int y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw DimensionError(std::string(op) + ": cannot broadcast " + a.str() + " with " + b.str());
  };
  return Shape{dim(a.n, b.n), dim(a.c, b.c), dim(a.h, b.h), dim(a.w, b.w)};
}

struct Strides {
  std::size_t n, c, h, w;
};

Strides broadcast_strides(const Shape& s) {
  const std::size_t sw = 1;
  const std::size_t sh = static_cast<std::size_t>(s.w);
  const std::size_t sc = sh * s.h;
  const std::size_t sn = sc * s.c;
  return Strides{s.n == 1 ? 0 : sn, s.c == 1 ? 0 : sc, s.h == 1 ? 0 : sh, s.w == 1 ? 0 : sw};
}

// Visits every output element with (out_index, a_index, b_index).
template <class F>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b, F&& f) {
  if (a == out && b == out) {
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  const Strides sa = broadcast_strides(a);
  const Strides sb = broadcast_strides(b);
  std::size_t o = 0;
  for (int n = 0; n < out.n; ++n) {
    for (int c = 0; c < out.c; ++c) {
      for (int y = 0; y < out.h; ++y) {
        const std::size_t ia = n * sa.n + c * sa.c + y * sa.h;
        const std::size_t ib = n * sb.n + c * sb.c + y * sb.h;
        for (int x = 0; x < out.w; ++x, ++o) f(o, ia + x * sa.w, ib + x * sb.w);
      }
    }
  }
}

// out = f(a, b); backward accumulates g * da(a, b) and g * db(a, b).
template <class T, class F, class DA, class DB>
Tensor<T> binary(const char* name, const Tensor<T>& a, const Tensor<T>& b, F f, DA da, DB db) {
  const Shape out_shape = broadcast_shape(name, a.shape(), b.shape());
  OpResult<T> r(name, out_shape, {&a, &b});
  {
    auto& out = r.out();
    const auto& av = a.values();
    const auto& bv = b.values();
    for_each_broadcast(out_shape, a.shape(), b.shape(),
                       [&](std::size_t o, std::size_t ia, std::size_t ib) { out[o] = f(av[ia], bv[ib]); });
  }
  r.set_backward([da, db](Node<T>& self) {
    Node<T>& pa = parent(self, 0);
    Node<T>& pb = parent(self, 1);
    const auto& g = self.grad;
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      for_each_broadcast(self.shape, pa.shape, pb.shape, [&](std::size_t o, std::size_t ia, std::size_t ib) {
        ga[ia] += g[o] * da(pa.data[ia], pb.data[ib]);
      });
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for_each_broadcast(self.shape, pa.shape, pb.shape, [&](std::size_t o, std::size_t ia, std::size_t ib) {
        gb[ib] += g[o] * db(pa.data[ia], pb.data[ib]);
      });
    }
  });
  return std::move(r).tensor();
}

template <class T, class F, class D>
Tensor<T> unary(const char* name, const Tensor<T>& x, F f, D d) {
  OpResult<T> r(name, x.shape(), {&x});
  {
    auto& out = r.out();
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  }
  r.set_backward([d](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    auto& gx = px.ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * d(px.data[i], self.data[i]);
  });
  return std::move(r).tensor();
}

template <class T>
T fault_factor(const char* op) {
  return debug::fault_active(op) ? T(1.5) : T(1);
}

template <class T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// ---------------------------------------------------------------------------
// Dense products: C += op(A) op(B) with op(A) M x K and op(B) K x N.

template <class T>
void gemm_acc(bool ta, bool tb, int M, int N, int K, const T* A, const T* B, T* C) {
  if (!ta && !tb) {
    for (int i = 0; i < M; ++i) {
      T* crow = C + static_cast<std::size_t>(i) * N;
      for (int k = 0; k < K; ++k) {
        const T a = A[static_cast<std::size_t>(i) * K + k];
        if (a == T(0)) continue;
        const T* brow = B + static_cast<std::size_t>(k) * N;
        for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
      }
    }
  } else if (!ta && tb) {
    for (int i = 0; i < M; ++i) {
      const T* arow = A + static_cast<std::size_t>(i) * K;
      for (int j = 0; j < N; ++j) {
        const T* brow = B + static_cast<std::size_t>(j) * K;
        T acc = T(0);
        for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
        C[static_cast<std::size_t>(i) * N + j] += acc;
      }
    }
  } else if (ta && !tb) {
    for (int k = 0; k < K; ++k) {
      const T* acol = A + static_cast<std::size_t>(k) * M;
      const T* brow = B + static_cast<std::size_t>(k) * N;
      for (int i = 0; i < M; ++i) {
        const T a = acol[i];
        if (a == T(0)) continue;
        T* crow = C + static_cast<std::size_t>(i) * N;
        for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
      }
    }
  } else {
    for (int i = 0; i < M; ++i) {
      for (int j = 0; j < N; ++j) {
        const T* brow = B + static_cast<std::size_t>(j) * K;
        T acc = T(0);
        for (int k = 0; k < K; ++k) acc += A[static_cast<std::size_t>(k) * M + i] * brow[k];
        C[static_cast<std::size_t>(i) * N + j] += acc;
      }
    }
  }
}

// Output rows/cols [lo, hi) whose input coordinate o*stride - pad + k lies in [0, extent).
struct Span1 {
  int lo, hi;
};

Span1 valid_range(int out_extent, int in_extent, int stride, int pad, int k) {
  // smallest o with o*s >= pad - k
  int lo = pad - k <= 0 ? 0 : (pad - k + stride - 1) / stride;
  // largest o with o*s <= in_extent - 1 + pad - k
  const int top = in_extent - 1 + pad - k;
  int hi = top < 0 ? 0 : top / stride + 1;
  lo = std::min(lo, out_extent);
  hi = std::clamp(hi, lo, out_extent);
  return {lo, hi};
}

}  // namespace

// ---------------------------------------------------------------------------

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
      [](T x, T y) { return -x / (y * y); });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  return unary<T>(
      "scale", a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return unary<T>(
      "add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  switch (kind) {
    case Activation::gelu: {
      const T k = fault_factor<T>("gelu");
      return unary<T>(
          "gelu", x, [](T v) { return T(0.5) * v * (T(1) + std::erf(v / std::numbers::sqrt2_v<T>)); },
          [k](T v, T) {
            const T cdf = T(0.5) * (T(1) + std::erf(v / std::numbers::sqrt2_v<T>));
            const T pdf = std::exp(T(-0.5) * v * v) * (std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>);
            return k * (cdf + v * pdf);
          });
    }
    case Activation::relu: {
      const T k = fault_factor<T>("relu");
      return unary<T>(
          "relu", x, [](T v) { return v > T(0) ? v : T(0); }, [k](T v, T) { return v > T(0) ? k : T(0); });
    }
    case Activation::sigmoid: {
      const T k = fault_factor<T>("sigmoid");
      return unary<T>(
          "sigmoid", x, [](T v) { return stable_sigmoid(v); }, [k](T, T s) { return k * s * (T(1) - s); });
    }
  }
  throw ConfigError("activation: unknown kind");
}

template <class T>
Tensor<T> exp(const Tensor<T>& x) {
  const T k = fault_factor<T>("exp");
  return unary<T>(
      "exp", x, [](T v) { return std::exp(v); }, [k](T, T y) { return k * y; });
}

template <class T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary<T>(
      "abs", x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <class T>
Tensor<T> square(const Tensor<T>& x) {
  return unary<T>(
      "square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  OpResult<T> r("sum", Shape{}, {&x});
  T acc = T(0);
  for (T v : x.values()) acc += v;
  r.out()[0] = acc;
  r.set_backward([](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    auto& gx = px.ensure_grad();
    for (auto& g : gx) g += self.grad[0];
  });
  return std::move(r).tensor();
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

// ---------------------------------------------------------------------------

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const std::type_identity_t<Tensor<T>>* bias, int stride,
                 int padding, int groups) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (groups < 1 || xs.c % groups != 0 || ws.n % groups != 0) {
    throw ConfigError("conv2d: groups=" + std::to_string(groups) + " must divide c_in=" +
                      std::to_string(xs.c) + " and c_out=" + std::to_string(ws.n));
  }
  if (ws.c * groups != xs.c || ws.h != ws.w) {
    throw DimensionError("conv2d: weight " + ws.str() + " incompatible with input " + xs.str() +
                         " (groups=" + std::to_string(groups) + ")");
  }
  if (bias != nullptr && bias->numel() != static_cast<std::size_t>(ws.n)) {
    throw DimensionError("conv2d: bias has " + std::to_string(bias->numel()) + " entries, expected " +
                         std::to_string(ws.n));
  }
  if (stride < 1 || padding < 0) throw ConfigError("conv2d: stride must be >= 1 and padding >= 0");
  const int k = ws.h;
  const int oh = (xs.h + 2 * padding - k) / stride + 1;
  const int ow = (xs.w + 2 * padding - k) / stride + 1;
  if (oh < 1 || ow < 1) throw DimensionError("conv2d: kernel larger than padded input " + xs.str());
  const Shape os{xs.n, ws.n, oh, ow};
  const int cin_g = xs.c / groups;
  const int cout_g = ws.n / groups;

  OpResult<T> r("conv2d", os, {&x, &weight, bias});
  struct Geometry {
    Shape xs, ws, os;
    int k, stride, padding, groups, cin_g, cout_g;
    bool has_bias;
  };
  const Geometry geo{xs, ws, os, k, stride, padding, groups, cin_g, cout_g, bias != nullptr};

  // visit(n, co, ci, ky, kx, oy, ox_lo, ox_hi, in_row_offset) style loops are
  // written out per pass so each inner loop stays contiguous for stride 1.
  {
    auto& out = r.out();
    const T* xv = x.values().data();
    const T* wv = weight.values().data();
    const std::size_t oplane = os.plane();
    const std::size_t iplane = xs.plane();
    const bool pointwise = k == 1 && stride == 1 && padding == 0;
    for (int n = 0; n < xs.n; ++n) {
      for (int co = 0; co < ws.n; ++co) {
        T* orow = out.data() + (static_cast<std::size_t>(n) * ws.n + co) * oplane;
        if (bias != nullptr) std::fill(orow, orow + oplane, bias->values()[co]);
        const int g = co / cout_g;
        for (int cl = 0; cl < cin_g; ++cl) {
          const int ci = g * cin_g + cl;
          const T* iplane_ptr = xv + (static_cast<std::size_t>(n) * xs.c + ci) * iplane;
          const T* wk = wv + (static_cast<std::size_t>(co) * cin_g + cl) * k * k;
          if (pointwise) {
            const T wgt = wk[0];
            for (std::size_t p = 0; p < oplane; ++p) orow[p] += wgt * iplane_ptr[p];
            continue;
          }
          for (int ky = 0; ky < k; ++ky) {
            const Span1 ry = valid_range(oh, xs.h, stride, padding, ky);
            for (int kx = 0; kx < k; ++kx) {
              const T wgt = wk[ky * k + kx];
              const Span1 rx = valid_range(ow, xs.w, stride, padding, kx);
              for (int oy = ry.lo; oy < ry.hi; ++oy) {
                const int iy = oy * stride - padding + ky;
                const T* in = iplane_ptr + static_cast<std::size_t>(iy) * xs.w;
                T* o = orow + static_cast<std::size_t>(oy) * ow;
                if (stride == 1) {
                  const int shift = kx - padding;
                  for (int ox = rx.lo; ox < rx.hi; ++ox) o[ox] += wgt * in[ox + shift];
                } else {
                  for (int ox = rx.lo; ox < rx.hi; ++ox) o[ox] += wgt * in[ox * stride - padding + kx];
                }
              }
            }
          }
        }
      }
    }
  }

  r.set_backward([geo](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    Node<T>& pw = parent(self, 1);
    const auto& gout = self.grad;
    const Shape& xs = geo.xs;
    const Shape& ws = geo.ws;
    const Shape& os = geo.os;
    const int k = geo.k;
    const int stride = geo.stride;
    const int padding = geo.padding;
    const std::size_t oplane = os.plane();
    const std::size_t iplane = xs.plane();
    T* gx = px.requires_grad ? px.ensure_grad().data() : nullptr;
    T* gw = pw.requires_grad ? pw.ensure_grad().data() : nullptr;
    const T* xv = px.data.data();
    const T* wv = pw.data.data();
    for (int n = 0; n < xs.n; ++n) {
      for (int co = 0; co < ws.n; ++co) {
        const T* grow = gout.data() + (static_cast<std::size_t>(n) * ws.n + co) * oplane;
        const int g = co / geo.cout_g;
        for (int cl = 0; cl < geo.cin_g; ++cl) {
          const int ci = g * geo.cin_g + cl;
          const std::size_t ioff = (static_cast<std::size_t>(n) * xs.c + ci) * iplane;
          const std::size_t woff = (static_cast<std::size_t>(co) * geo.cin_g + cl) * k * k;
          for (int ky = 0; ky < k; ++ky) {
            const Span1 ry = valid_range(os.h, xs.h, stride, padding, ky);
            for (int kx = 0; kx < k; ++kx) {
              const Span1 rx = valid_range(os.w, xs.w, stride, padding, kx);
              const T wgt = wv[woff + ky * k + kx];
              T wacc = T(0);
              for (int oy = ry.lo; oy < ry.hi; ++oy) {
                const int iy = oy * stride - padding + ky;
                const std::size_t irow = ioff + static_cast<std::size_t>(iy) * xs.w;
                const T* go = grow + static_cast<std::size_t>(oy) * os.w;
                for (int ox = rx.lo; ox < rx.hi; ++ox) {
                  const std::size_t ii = irow + (ox * stride - padding + kx);
                  wacc += go[ox] * xv[ii];
                  if (gx != nullptr) gx[ii] += go[ox] * wgt;
                }
              }
              if (gw != nullptr) gw[woff + ky * k + kx] += wacc;
            }
          }
        }
      }
    }
    if (geo.has_bias) {
      Node<T>& pb = parent(self, 2);
      if (pb.requires_grad) {
        auto& gb = pb.ensure_grad();
        for (int n = 0; n < xs.n; ++n) {
          for (int co = 0; co < ws.n; ++co) {
            const T* grow = gout.data() + (static_cast<std::size_t>(n) * ws.n + co) * oplane;
            T acc = T(0);
            for (std::size_t p = 0; p < oplane; ++p) acc += grow[p];
            gb[co] += acc;
          }
        }
      }
    }
  });
  return std::move(r).tensor();
}

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const std::type_identity_t<Tensor<T>>* bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (xs.h != 1 || xs.w != 1 || ws.h != 1 || ws.w != 1 || ws.c != xs.c) {
    throw DimensionError("linear: input " + xs.str() + " incompatible with weight " + ws.str());
  }
  if (bias != nullptr && bias->numel() != static_cast<std::size_t>(ws.n)) {
    throw DimensionError("linear: bias size mismatch");
  }
  const int rows = xs.n;
  const int din = xs.c;
  const int dout = ws.n;
  OpResult<T> r("linear", Shape{rows, dout, 1, 1}, {&x, &weight, bias});
  auto& out = r.out();
  for (int i = 0; i < rows; ++i) {
    if (bias != nullptr) std::copy(bias->values().begin(), bias->values().end(), out.begin() + i * dout);
  }
  gemm_acc<T>(false, true, rows, dout, din, x.values().data(), weight.values().data(), out.data());
  const bool has_bias = bias != nullptr;
  r.set_backward([rows, din, dout, has_bias](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    Node<T>& pw = parent(self, 1);
    const T* g = self.grad.data();
    if (px.requires_grad) gemm_acc<T>(false, false, rows, din, dout, g, pw.data.data(), px.ensure_grad().data());
    if (pw.requires_grad) gemm_acc<T>(true, false, dout, din, rows, g, px.data.data(), pw.ensure_grad().data());
    if (has_bias) {
      Node<T>& pb = parent(self, 2);
      if (pb.requires_grad) {
        auto& gb = pb.ensure_grad();
        for (int i = 0; i < rows; ++i)
          for (int o = 0; o < dout; ++o) gb[o] += g[static_cast<std::size_t>(i) * dout + o];
      }
    }
  });
  return std::move(r).tensor();
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool ta, bool tb) {
  const Shape as = a.shape();
  const Shape bs = b.shape();
  if (as.n != bs.n || as.c != bs.c) throw DimensionError("matmul: batch extents differ: " + as.str() + " vs " + bs.str());
  const int M = ta ? as.w : as.h;
  const int K = ta ? as.h : as.w;
  const int Kb = tb ? bs.w : bs.h;
  const int N = tb ? bs.h : bs.w;
  if (K != Kb) throw DimensionError("matmul: inner extents differ: " + as.str() + " vs " + bs.str());
  const Shape os{as.n, as.c, M, N};
  OpResult<T> r("matmul", os, {&a, &b});
  const std::size_t batches = static_cast<std::size_t>(as.n) * as.c;
  const std::size_t asz = as.plane();
  const std::size_t bsz = bs.plane();
  const std::size_t osz = os.plane();
  {
    auto& out = r.out();
    for (std::size_t bi = 0; bi < batches; ++bi) {
      gemm_acc<T>(ta, tb, M, N, K, a.values().data() + bi * asz, b.values().data() + bi * bsz,
                  out.data() + bi * osz);
    }
  }
  r.set_backward([=](Node<T>& self) {
    Node<T>& pa = parent(self, 0);
    Node<T>& pb = parent(self, 1);
    for (std::size_t bi = 0; bi < batches; ++bi) {
      const T* g = self.grad.data() + bi * osz;
      const T* A = pa.data.data() + bi * asz;
      const T* B = pb.data.data() + bi * bsz;
      if (pa.requires_grad) {
        T* gA = pa.ensure_grad().data() + bi * asz;
        if (!ta) {
          gemm_acc<T>(false, !tb, M, K, N, g, B, gA);
        } else {
          gemm_acc<T>(tb, true, K, M, N, B, g, gA);
        }
      }
      if (pb.requires_grad) {
        T* gB = pb.ensure_grad().data() + bi * bsz;
        if (!tb) {
          gemm_acc<T>(!ta, false, K, N, M, A, g, gB);
        } else {
          gemm_acc<T>(true, ta, N, K, M, g, A, gB);
        }
      }
    }
  });
  return std::move(r).tensor();
}

template <class T>
Tensor<T> softmax(const Tensor<T>& x) {
  const Shape s = x.shape();
  const std::size_t cols = static_cast<std::size_t>(s.w);
  const std::size_t rows = x.numel() / cols;
  OpResult<T> r("softmax", s, {&x});
  {
    auto& out = r.out();
    const auto& xv = x.values();
    for (std::size_t i = 0; i < rows; ++i) {
      const T* in = xv.data() + i * cols;
      T* o = out.data() + i * cols;
      const T mx = *std::max_element(in, in + cols);
      T z = T(0);
      for (std::size_t j = 0; j < cols; ++j) {
        o[j] = std::exp(in[j] - mx);
        z += o[j];
      }
      for (std::size_t j = 0; j < cols; ++j) o[j] /= z;
    }
  }
  const T k = fault_factor<T>("softmax");
  r.set_backward([rows, cols, k](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    auto& gx = px.ensure_grad();
    for (std::size_t i = 0; i < rows; ++i) {
      const T* y = self.data.data() + i * cols;
      const T* g = self.grad.data() + i * cols;
      T dot = T(0);
      for (std::size_t j = 0; j < cols; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < cols; ++j) gx[i * cols + j] += k * y[j] * (g[j] - dot);
    }
  });
  return std::move(r).tensor();
}

template <class T>
Tensor<T> l2_normalize(const Tensor<T>& x, T eps) {
  const Shape s = x.shape();
  const std::size_t cols = static_cast<std::size_t>(s.w);
  const std::size_t rows = x.numel() / cols;
  OpResult<T> r("l2_normalize", s, {&x});
  std::vector<T> norms(rows);
  {
    auto& out = r.out();
    const auto& xv = x.values();
    for (std::size_t i = 0; i < rows; ++i) {
      T ss = T(0);
      for (std::size_t j = 0; j < cols; ++j) ss += xv[i * cols + j] * xv[i * cols + j];
      norms[i] = std::max(std::sqrt(ss), eps);
      for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = xv[i * cols + j] / norms[i];
    }
  }
  r.set_backward([rows, cols, eps, norms = std::move(norms)](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    auto& gx = px.ensure_grad();
    for (std::size_t i = 0; i < rows; ++i) {
      const T* y = self.data.data() + i * cols;
      const T* g = self.grad.data() + i * cols;
      if (norms[i] <= eps) {
        for (std::size_t j = 0; j < cols; ++j) gx[i * cols + j] += g[j] / eps;
        continue;
      }
      T dot = T(0);
      for (std::size_t j = 0; j < cols; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < cols; ++j) gx[i * cols + j] += (g[j] - y[j] * dot) / norms[i];
    }
  });
  return std::move(r).tensor();
}

template <class T>
Tensor<T> normalize(const Tensor<T>& x, NormKind kind, int num_groups, T eps) {
  const Shape s = x.shape();
  // Each normalization set is `count` elements; element j of set i lives at
  // index(i, j). Layer mode strides over channels, group mode is contiguous.
  struct SetIndex {
    bool layer;
    std::size_t plane, chans, count;
    std::size_t operator()(std::size_t i, std::size_t j) const {
      return layer ? (i / plane) * chans * plane + i % plane + j * plane : i * count + j;
    }
  };
  std::size_t sets = 0;
  std::size_t count = 0;
  if (kind == NormKind::layer) {
    sets = static_cast<std::size_t>(s.n) * s.plane();
    count = static_cast<std::size_t>(s.c);
  } else {
    if (num_groups < 1 || s.c % num_groups != 0) {
      throw ConfigError("normalize: " + std::to_string(s.c) + " channels not divisible into " +
                        std::to_string(num_groups) + " groups");
    }
    sets = static_cast<std::size_t>(s.n) * num_groups;
    count = static_cast<std::size_t>(s.c / num_groups) * s.plane();
  }
  const SetIndex index{kind == NormKind::layer, s.plane(), static_cast<std::size_t>(s.c), count};

  OpResult<T> r(kind == NormKind::layer ? "layer_norm" : "group_norm", s, {&x});
  std::vector<T> inv_std(sets);
  {
    auto& out = r.out();
    const auto& xv = x.values();
    for (std::size_t i = 0; i < sets; ++i) {
      T mu = T(0);
      for (std::size_t j = 0; j < count; ++j) mu += xv[index(i, j)];
      mu /= static_cast<T>(count);
      T var = T(0);
      for (std::size_t j = 0; j < count; ++j) {
        const T d = xv[index(i, j)] - mu;
        var += d * d;
      }
      var /= static_cast<T>(count);
      inv_std[i] = T(1) / std::sqrt(var + eps);
      for (std::size_t j = 0; j < count; ++j) out[index(i, j)] = (xv[index(i, j)] - mu) * inv_std[i];
    }
  }
  r.set_backward([sets, count, index, inv_std = std::move(inv_std)](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    auto& gx = px.ensure_grad();
    const T inv_count = T(1) / static_cast<T>(count);
    for (std::size_t i = 0; i < sets; ++i) {
      T gmean = T(0);
      T gymean = T(0);
      for (std::size_t j = 0; j < count; ++j) {
        const std::size_t at = index(i, j);
        gmean += self.grad[at];
        gymean += self.grad[at] * self.data[at];
      }
      gmean *= inv_count;
      gymean *= inv_count;
      for (std::size_t j = 0; j < count; ++j) {
        const std::size_t at = index(i, j);
        gx[at] += inv_std[i] * (self.grad[at] - gmean - self.data[at] * gymean);
      }
    }
  });
  return std::move(r).tensor();
}

template <class T>
Tensor<T> pool(const Tensor<T>& x, PoolKind kind) {
  const Shape s = x.shape();
  const std::size_t plane = s.plane();
  if (plane == 0) throw DimensionError("pool: empty spatial extent");
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  const T inv = T(1) / static_cast<T>(plane);
  if (kind == PoolKind::gap) {
    OpResult<T> r("gap", Shape{s.n, s.c, 1, 1}, {&x});
    auto& out = r.out();
    for (std::size_t p = 0; p < planes; ++p) {
      T acc = T(0);
      for (std::size_t i = 0; i < plane; ++i) acc += x.values()[p * plane + i];
      out[p] = acc * inv;
    }
    r.set_backward([planes, plane, inv](Node<T>& self) {
      Node<T>& px = parent(self, 0);
      auto& gx = px.ensure_grad();
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < plane; ++i) gx[p * plane + i] += self.grad[p] * inv;
    });
    return std::move(r).tensor();
  }

  OpResult<T> r("mean_std", Shape{s.n, 2 * s.c, 1, 1}, {&x});
  auto& out = r.out();
  const std::size_t c = static_cast<std::size_t>(s.c);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* v = x.values().data() + p * plane;
    T mu = T(0);
    for (std::size_t i = 0; i < plane; ++i) mu += v[i];
    mu *= inv;
    T var = T(0);
    for (std::size_t i = 0; i < plane; ++i) var += (v[i] - mu) * (v[i] - mu);
    var *= inv;
    const std::size_t n = p / c;
    const std::size_t ch = p % c;
    out[n * 2 * c + ch] = mu;
    out[n * 2 * c + c + ch] = std::sqrt(var);
  }
  r.set_backward([planes, plane, inv, c](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    auto& gx = px.ensure_grad();
    for (std::size_t p = 0; p < planes; ++p) {
      const std::size_t n = p / c;
      const std::size_t ch = p % c;
      const T mu = self.data[n * 2 * c + ch];
      const T sd = self.data[n * 2 * c + c + ch];
      const T gmu = self.grad[n * 2 * c + ch];
      const T gsd = self.grad[n * 2 * c + c + ch];
      const T* v = px.data.data() + p * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        // d sd / d v_i = (v_i - mu) / (plane * sd); zero-variance sets take the zero subgradient.
        const T dsd = sd > T(0) ? (v[i] - mu) * inv / sd : T(0);
        gx[p * plane + i] += gmu * inv + gsd * dsd;
      }
    }
  });
  return std::move(r).tensor();
}

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_channels: no inputs");
  Shape s = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    if (ps.n != s.n || ps.h != s.h || ps.w != s.w) {
      throw DimensionError("concat_channels: " + ps.str() + " does not match " + s.str());
    }
    total += ps.c;
  }
  s.c = total;
  // OpResult takes an initializer list; record parents manually.
  OpResult<T> r("concat", s, {});
  Tensor<T> out = std::move(r).tensor();
  const std::size_t plane = s.plane();
  std::vector<int> offsets;
  int off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    for (int n = 0; n < s.n; ++n) {
      const auto src = p.values().begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(n) * p.shape().c * plane);
      std::copy(src, src + static_cast<std::ptrdiff_t>(p.shape().c * plane),
                out.values().begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(n) * s.c + off) * plane));
    }
    off += p.shape().c;
  }
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (grad_enabled() && any) {
    auto node = out.node();
    node->requires_grad = true;
    for (const auto& p : parts) node->parents.push_back(p.node());
    node->backward_fn = [offsets, plane](Node<T>& self) {
      for (std::size_t k = 0; k < self.parents.size(); ++k) {
        Node<T>& p = *self.parents[k];
        if (!p.requires_grad) continue;
        auto& g = p.ensure_grad();
        const std::size_t chunk = static_cast<std::size_t>(p.shape.c) * plane;
        for (int n = 0; n < self.shape.n; ++n) {
          const T* src = self.grad.data() + (static_cast<std::size_t>(n) * self.shape.c + offsets[k]) * plane;
          T* dst = g.data() + static_cast<std::size_t>(n) * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
    };
  }
  return out;
}

template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, int start, int count) {
  const Shape s = x.shape();
  if (start < 0 || count < 1 || start + count > s.c) {
    throw DimensionError("slice_channels: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + s.str());
  }
  const Shape os{s.n, count, s.h, s.w};
  const std::size_t plane = s.plane();
  OpResult<T> r("slice", os, {&x});
  auto& out = r.out();
  for (int n = 0; n < s.n; ++n) {
    const T* src = x.values().data() + (static_cast<std::size_t>(n) * s.c + start) * plane;
    std::copy(src, src + count * plane, out.data() + static_cast<std::size_t>(n) * count * plane);
  }
  r.set_backward([s, start, count, plane](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    auto& g = px.ensure_grad();
    for (int n = 0; n < s.n; ++n) {
      T* dst = g.data() + (static_cast<std::size_t>(n) * s.c + start) * plane;
      const T* src = self.grad.data() + static_cast<std::size_t>(n) * count * plane;
      for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
    }
  });
  return std::move(r).tensor();
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape.numel() != x.numel()) {
    throw DimensionError("reshape: " + x.shape().str() + " -> " + shape.str() + " changes element count");
  }
  OpResult<T> r("reshape", shape, {&x});
  r.out() = x.values();
  r.set_backward([](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    auto& g = px.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
  return std::move(r).tensor();
}

template <class T>
Tensor<T> resample(const Tensor<T>& x, ResampleKind kind, int r) {
  const Shape s = x.shape();
  if (r < 1) throw ConfigError("resample: factor must be >= 1");
  Shape lo;  // the (n, c r^2, h/r, w/r) side
  Shape hi;  // the (n, c, h, w) side
  if (kind == ResampleKind::unshuffle) {
    if (s.h % r != 0 || s.w % r != 0) {
      throw DimensionError("resample: " + s.str() + " spatial extents not divisible by " + std::to_string(r));
    }
    hi = s;
    lo = Shape{s.n, s.c * r * r, s.h / r, s.w / r};
  } else {
    if (s.c % (r * r) != 0) {
      throw DimensionError("resample: " + s.str() + " channels not divisible by " + std::to_string(r * r));
    }
    lo = s;
    hi = Shape{s.n, s.c / (r * r), s.h * r, s.w * r};
  }
  // Index pairs (hi_index, lo_index) for every element.
  auto visit = [lo, hi, r](auto&& f) {
    for (int n = 0; n < hi.n; ++n)
      for (int c = 0; c < hi.c; ++c)
        for (int y = 0; y < hi.h; ++y)
          for (int x = 0; x < hi.w; ++x) {
            const int lc = c * r * r + (y % r) * r + (x % r);
            const std::size_t hi_i = ((static_cast<std::size_t>(n) * hi.c + c) * hi.h + y) * hi.w + x;
            const std::size_t lo_i = ((static_cast<std::size_t>(n) * lo.c + lc) * lo.h + y / r) * lo.w + x / r;
            f(hi_i, lo_i);
          }
  };
  const bool down = kind == ResampleKind::unshuffle;
  OpResult<T> res(down ? "unshuffle" : "shuffle", down ? lo : hi, {&x});
  auto& out = res.out();
  const auto& in = x.values();
  visit([&](std::size_t hi_i, std::size_t lo_i) {
    if (down) {
      out[lo_i] = in[hi_i];
    } else {
      out[hi_i] = in[lo_i];
    }
  });
  res.set_backward([visit, down](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    auto& g = px.ensure_grad();
    visit([&](std::size_t hi_i, std::size_t lo_i) {
      if (down) {
        g[hi_i] += self.grad[lo_i];
      } else {
        g[lo_i] += self.grad[hi_i];
      }
    });
  });
  return std::move(res).tensor();
}

namespace {

// Applies the 2-D DFT with the given sign and scale to every (n, c) plane of a
// stacked real/imag tensor, accumulating into `out` when accumulate is set.
template <class T>
void stacked_dft(const Shape& s, const T* in, T* out, int sign, double scale_by, bool accumulate) {
  const int c = s.c / 2;
  const std::size_t plane = s.plane();
  std::vector<fft::cplx> buf(plane);
  for (int n = 0; n < s.n; ++n) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t re_off = (static_cast<std::size_t>(n) * s.c + ch) * plane;
      const std::size_t im_off = (static_cast<std::size_t>(n) * s.c + c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) buf[i] = fft::cplx(in[re_off + i], in[im_off + i]);
      fft::transform_2d(buf, s.h, s.w, sign);
      for (std::size_t i = 0; i < plane; ++i) {
        const T re = static_cast<T>(buf[i].real() * scale_by);
        const T im = static_cast<T>(buf[i].imag() * scale_by);
        if (accumulate) {
          out[re_off + i] += re;
          out[im_off + i] += im;
        } else {
          out[re_off + i] = re;
          out[im_off + i] = im;
        }
      }
    }
  }
}

}  // namespace

template <class T>
Tensor<T> spectral_transform(const Tensor<T>& stacked, bool inverse) {
  const Shape s = stacked.shape();
  if (s.c % 2 != 0) throw DimensionError("spectral_transform: expects stacked real/imag channels, got " + s.str());
  const int sign = inverse ? +1 : -1;
  const double k = inverse ? 1.0 / static_cast<double>(s.plane()) : 1.0;
  OpResult<T> r(inverse ? "ifft2d" : "fft2d", s, {&stacked});
  stacked_dft<T>(s, stacked.values().data(), r.out().data(), sign, k, false);
  // y = k F_sign x is complex-linear, so the adjoint is k F_{-sign}.
  r.set_backward([s, sign, k](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    stacked_dft<T>(s, self.grad.data(), px.ensure_grad().data(), -sign, k, true);
  });
  return std::move(r).tensor();
}

template <class T>
ComplexMap<T> fft2d(const Tensor<T>& x) {
  const int c = x.shape().c;
  const Tensor<T> zeros(x.shape());
  const Tensor<T> spec = spectral_transform(concat_channels<T>({x, zeros}), false);
  return {slice_channels(spec, 0, c), slice_channels(spec, c, c)};
}

template <class T>
Tensor<T> ifft2d(const ComplexMap<T>& z) {
  if (!(z.real.shape() == z.imag.shape())) {
    throw DimensionError("ifft2d: real " + z.real.shape().str() + " and imag " + z.imag.shape().str() + " differ");
  }
  const Tensor<T> spatial = spectral_transform(concat_channels<T>({z.real, z.imag}), true);
  return slice_channels(spatial, 0, z.real.shape().c);
}

#define DACG_INSTANTIATE_OPS(T)                                                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                                \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                           \
  template Tensor<T> activation(const Tensor<T>&, Activation);                                  \
  template Tensor<T> exp(const Tensor<T>&);                                                     \
  template Tensor<T> abs(const Tensor<T>&);                                                     \
  template Tensor<T> square(const Tensor<T>&);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                     \
  template Tensor<T> mean(const Tensor<T>&);                                                    \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, int, int, int); \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*);              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&, bool, bool);                    \
  template Tensor<T> softmax(const Tensor<T>&);                                                 \
  template Tensor<T> l2_normalize(const Tensor<T>&, T);                                         \
  template Tensor<T> normalize(const Tensor<T>&, NormKind, int, T);                             \
  template Tensor<T> pool(const Tensor<T>&, PoolKind);                                          \
  template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                            \
  template Tensor<T> slice_channels(const Tensor<T>&, int, int);                                \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                          \
  template Tensor<T> resample(const Tensor<T>&, ResampleKind, int);                             \
  template Tensor<T> spectral_transform(const Tensor<T>&, bool);                                \
  template ComplexMap<T> fft2d(const Tensor<T>&);                                               \
  template Tensor<T> ifft2d(const ComplexMap<T>&);

DACG_INSTANTIATE_OPS(float)
DACG_INSTANTIATE_OPS(double)

}  // namespace dacg
