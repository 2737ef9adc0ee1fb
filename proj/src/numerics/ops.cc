// Copyright 2026 The promptse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "promptse/numerics/ops.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>

#include "numerics/eigen_maps.h"

namespace promptse::ops {
namespace {

std::string Describe(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": incompatible shapes " + ShapeString(a) +
         " and " + ShapeString(b);
}

// Number of consecutive `a` elements that share one `b` element. Throws
// unless `b` equals `a` with a suffix of axes set to 1.
int64_t BroadcastInner(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return 1;
  if (a.size() != b.size()) throw ShapeError(Describe(op, a, b));
  size_t k = a.size();
  while (k > 0 && b[k - 1] == 1) --k;
  for (size_t i = 0; i < k; ++i) {
    if (a[i] != b[i]) {
      throw ShapeError(Describe(op, a, b) + " (axis " + std::to_string(i) +
                       ": " + std::to_string(a[i]) + " vs " +
                       std::to_string(b[i]) + ")");
    }
  }
  int64_t inner = 1;
  for (size_t i = k; i < a.size(); ++i) inner *= a[i];
  return inner;
}

const char* KindName(ElementwiseKind kind) {
  switch (kind) {
    case ElementwiseKind::kAdd: return "add";
    case ElementwiseKind::kSub: return "sub";
    case ElementwiseKind::kMul: return "mul";
    case ElementwiseKind::kDiv: return "div";
    case ElementwiseKind::kRelu: return "relu";
    case ElementwiseKind::kSigmoid: return "sigmoid";
    case ElementwiseKind::kTanh: return "tanh";
    case ElementwiseKind::kLog: return "log";
    case ElementwiseKind::kSqrt: return "sqrt";
    case ElementwiseKind::kSquare: return "square";
  }
  return "elementwise";
}

template <typename T>
Var<T> Unary(ElementwiseKind kind, const Var<T>& a) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  const int64_t n = x.size();
  const T* px = x.data();
  T* py = y.data();
  switch (kind) {
    case ElementwiseKind::kRelu:
      for (int64_t i = 0; i < n; ++i) py[i] = px[i] > T(0) ? px[i] : T(0);
      break;
    case ElementwiseKind::kSigmoid:
      for (int64_t i = 0; i < n; ++i) py[i] = T(1) / (T(1) + std::exp(-px[i]));
      break;
    case ElementwiseKind::kTanh:
      for (int64_t i = 0; i < n; ++i) py[i] = std::tanh(px[i]);
      break;
    case ElementwiseKind::kLog:
      for (int64_t i = 0; i < n; ++i) py[i] = std::log(px[i]);
      break;
    case ElementwiseKind::kSqrt:
      for (int64_t i = 0; i < n; ++i) py[i] = std::sqrt(px[i]);
      break;
    case ElementwiseKind::kSquare:
      for (int64_t i = 0; i < n; ++i) py[i] = px[i] * px[i];
      break;
    default:
      throw Error("unary dispatch on a binary kind");
  }
  Tape<T>* tape = a.tape();
  return tape->Record(
      KindName(kind), std::move(y), {a},
      [tape, a, kind](const Tensor<T>& g, const Tensor<T>& out) {
        const T* px = a.value().data();
        const T* py = out.data();
        const T* pg = g.data();
        T* ga = tape->GradRef(a).data();
        const int64_t n = g.size();
        switch (kind) {
          case ElementwiseKind::kRelu:
            for (int64_t i = 0; i < n; ++i) {
              if (px[i] > T(0)) ga[i] += pg[i];
            }
            break;
          case ElementwiseKind::kSigmoid:
            for (int64_t i = 0; i < n; ++i) {
              ga[i] += pg[i] * py[i] * (T(1) - py[i]);
            }
            break;
          case ElementwiseKind::kTanh:
            for (int64_t i = 0; i < n; ++i) {
              ga[i] += pg[i] * (T(1) - py[i] * py[i]);
            }
            break;
          case ElementwiseKind::kLog:
            for (int64_t i = 0; i < n; ++i) ga[i] += pg[i] / px[i];
            break;
          case ElementwiseKind::kSqrt:
            for (int64_t i = 0; i < n; ++i) ga[i] += pg[i] / (T(2) * py[i]);
            break;
          case ElementwiseKind::kSquare:
            for (int64_t i = 0; i < n; ++i) ga[i] += T(2) * px[i] * pg[i];
            break;
          default:
            break;
        }
      });
}

template <typename T>
Var<T> Binary(ElementwiseKind kind, const Var<T>& a, const Var<T>& b) {
  if (!b.valid()) {
    throw ShapeError(std::string(KindName(kind)) + ": missing second operand");
  }
  const char* name = KindName(kind);
  const int64_t inner = BroadcastInner(a.shape(), b.shape(), name);
  const Tensor<T>& x = a.value();
  const Tensor<T>& z = b.value();
  Tensor<T> y(x.shape());
  const int64_t n = x.size();
  const T* px = x.data();
  const T* pz = z.data();
  T* py = y.data();
  switch (kind) {
    case ElementwiseKind::kAdd:
      for (int64_t i = 0; i < n; ++i) py[i] = px[i] + pz[i / inner];
      break;
    case ElementwiseKind::kSub:
      for (int64_t i = 0; i < n; ++i) py[i] = px[i] - pz[i / inner];
      break;
    case ElementwiseKind::kMul:
      for (int64_t i = 0; i < n; ++i) py[i] = px[i] * pz[i / inner];
      break;
    case ElementwiseKind::kDiv:
      for (int64_t i = 0; i < n; ++i) py[i] = px[i] / pz[i / inner];
      break;
    default:
      throw Error("binary dispatch on a unary kind");
  }
  Tape<T>* tape = a.tape();
  return tape->Record(
      name, std::move(y), {a, b},
      [tape, a, b, kind, inner](const Tensor<T>& g, const Tensor<T>&) {
        const T* px = a.value().data();
        const T* pz = b.value().data();
        const T* pg = g.data();
        const int64_t n = g.size();
        if (a.requires_grad()) {
          T* ga = tape->GradRef(a).data();
          for (int64_t i = 0; i < n; ++i) {
            switch (kind) {
              case ElementwiseKind::kAdd:
              case ElementwiseKind::kSub:
                ga[i] += pg[i];
                break;
              case ElementwiseKind::kMul:
                ga[i] += pg[i] * pz[i / inner];
                break;
              default:
                ga[i] += pg[i] / pz[i / inner];
                break;
            }
          }
        }
        if (b.requires_grad()) {
          T* gb = tape->GradRef(b).data();
          for (int64_t i = 0; i < n; ++i) {
            const T zi = pz[i / inner];
            switch (kind) {
              case ElementwiseKind::kAdd:
                gb[i / inner] += pg[i];
                break;
              case ElementwiseKind::kSub:
                gb[i / inner] -= pg[i];
                break;
              case ElementwiseKind::kMul:
                gb[i / inner] += pg[i] * px[i];
                break;
              default:
                gb[i / inner] -= pg[i] * px[i] / (zi * zi);
                break;
            }
          }
        }
      });
}

// Splits x[..., D] into (rows, D).
std::pair<int64_t, int64_t> RowsAndChannels(const Shape& s, const char* op) {
  if (s.empty()) throw ShapeError(std::string(op) + ": rank-0 input");
  const int64_t d = s.back();
  if (d == 0) throw ShapeError(std::string(op) + ": empty last axis");
  return {NumElements(s) / d, d};
}

// cols[(c*kh + ki)*kw + kj, oy*wo + ox] = in[c, oy*sh - ph + ki, ox*sw - pw + kj]
template <typename T>
void Im2Col(const T* in, int64_t channels, int64_t height, int64_t width,
            int64_t kh, int64_t kw, const Conv2dGeometry& geo, int64_t ho,
            int64_t wo, T* cols) {
  const int64_t sh = geo.stride[0], sw = geo.stride[1];
  const int64_t ph = geo.padding[0], pw = geo.padding[1];
  for (int64_t c = 0; c < channels; ++c) {
    const T* plane = in + c * height * width;
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        T* row = cols + ((c * kh + ki) * kw + kj) * ho * wo;
        for (int64_t oy = 0; oy < ho; ++oy) {
          const int64_t iy = oy * sh - ph + ki;
          T* dst = row + oy * wo;
          if (iy < 0 || iy >= height) {
            for (int64_t ox = 0; ox < wo; ++ox) dst[ox] = T(0);
            continue;
          }
          const T* src = plane + iy * width;
          for (int64_t ox = 0; ox < wo; ++ox) {
            const int64_t ix = ox * sw - pw + kj;
            dst[ox] = (ix < 0 || ix >= width) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of Im2Col: scatters-adds columns back into an image.
template <typename T>
void Col2Im(const T* cols, int64_t channels, int64_t height, int64_t width,
            int64_t kh, int64_t kw, const Conv2dGeometry& geo, int64_t ho,
            int64_t wo, T* out) {
  const int64_t sh = geo.stride[0], sw = geo.stride[1];
  const int64_t ph = geo.padding[0], pw = geo.padding[1];
  for (int64_t c = 0; c < channels; ++c) {
    T* plane = out + c * height * width;
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        const T* row = cols + ((c * kh + ki) * kw + kj) * ho * wo;
        for (int64_t oy = 0; oy < ho; ++oy) {
          const int64_t iy = oy * sh - ph + ki;
          if (iy < 0 || iy >= height) continue;
          T* dst = plane + iy * width;
          const T* src = row + oy * wo;
          for (int64_t ox = 0; ox < wo; ++ox) {
            const int64_t ix = ox * sw - pw + kj;
            if (ix >= 0 && ix < width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

void CheckGeometry(const Conv2dGeometry& geo, const char* op) {
  if (geo.stride[0] < 1 || geo.stride[1] < 1) {
    throw ShapeError(std::string(op) + ": strides must be >= 1");
  }
  if (geo.padding[0] < 0 || geo.padding[1] < 0) {
    throw ShapeError(std::string(op) + ": negative padding");
  }
}

template <typename T>
void AddRowBias(T* y, const T* bias, int64_t rows, int64_t cols) {
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) y[r * cols + c] += bias[r];
  }
}

template <typename T>
void AccumulateRowSums(const T* g, int64_t rows, int64_t cols, T* out) {
  for (int64_t r = 0; r < rows; ++r) {
    T s = 0;
    for (int64_t c = 0; c < cols; ++c) s += g[r * cols + c];
    out[r] += s;
  }
}

}  // namespace

template <typename T>
Var<T> Elementwise(ElementwiseKind kind, const Var<T>& a, const Var<T>& b) {
  switch (kind) {
    case ElementwiseKind::kAdd:
    case ElementwiseKind::kSub:
    case ElementwiseKind::kMul:
    case ElementwiseKind::kDiv:
      return Binary(kind, a, b);
    default:
      return Unary(kind, a);
  }
}

template <typename T>
Var<T> Affine(const Var<T>& a, double scale, double shift) {
  Tensor<T> y(a.shape());
  const T s = static_cast<T>(scale), c = static_cast<T>(shift);
  const T* px = a.value().data();
  for (int64_t i = 0; i < y.size(); ++i) y[i] = px[i] * s + c;
  Tape<T>* tape = a.tape();
  return tape->Record("affine", std::move(y), {a},
                      [tape, a, s](const Tensor<T>& g, const Tensor<T>&) {
                        T* ga = tape->GradRef(a).data();
                        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
                      });
}

template <typename T>
Var<T> AddChannels(const Var<T>& x, const Var<T>& v) {
  const auto [rows, d] = RowsAndChannels(x.shape(), "add_channels");
  if (v.value().size() != d || v.rank() != 1) {
    throw ShapeError(Describe("add_channels", x.shape(), v.shape()));
  }
  Tensor<T> y = x.value();
  const T* pv = v.value().data();
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < d; ++c) y[r * d + c] += pv[c];
  }
  Tape<T>* tape = x.tape();
  return tape->Record(
      "add_channels", std::move(y), {x, v},
      [tape, x, v, rows, d](const Tensor<T>& g, const Tensor<T>&) {
        if (x.requires_grad()) {
          T* gx = tape->GradRef(x).data();
          for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (v.requires_grad()) {
          T* gv = tape->GradRef(v).data();
          for (int64_t r = 0; r < rows; ++r) {
            for (int64_t c = 0; c < d; ++c) gv[c] += g[r * d + c];
          }
        }
      });
}

template <typename T>
Var<T> MulChannels(const Var<T>& x, const Var<T>& v) {
  const auto [rows, d] = RowsAndChannels(x.shape(), "mul_channels");
  if (v.value().size() != d || v.rank() != 1) {
    throw ShapeError(Describe("mul_channels", x.shape(), v.shape()));
  }
  Tensor<T> y = x.value();
  const T* pv = v.value().data();
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < d; ++c) y[r * d + c] *= pv[c];
  }
  Tape<T>* tape = x.tape();
  return tape->Record(
      "mul_channels", std::move(y), {x, v},
      [tape, x, v, rows, d](const Tensor<T>& g, const Tensor<T>&) {
        const T* px = x.value().data();
        const T* pv = v.value().data();
        if (x.requires_grad()) {
          T* gx = tape->GradRef(x).data();
          for (int64_t r = 0; r < rows; ++r) {
            for (int64_t c = 0; c < d; ++c) gx[r * d + c] += g[r * d + c] * pv[c];
          }
        }
        if (v.requires_grad()) {
          T* gv = tape->GradRef(v).data();
          for (int64_t r = 0; r < rows; ++r) {
            for (int64_t c = 0; c < d; ++c) gv[c] += g[r * d + c] * px[r * d + c];
          }
        }
      });
}

template <typename T>
Var<T> Sum(const Var<T>& a) {
  T s = 0;
  for (T v : a.value().values()) s += v;
  Tape<T>* tape = a.tape();
  return tape->Record("sum", Tensor<T>::Scalar(s), {a},
                      [tape, a](const Tensor<T>& g, const Tensor<T>&) {
                        Tensor<T>& ga = tape->GradRef(a);
                        for (auto& v : ga.values()) v += g[0];
                      });
}

template <typename T>
Var<T> Dot(const Var<T>& a, const Var<T>& b) {
  if (a.value().size() != b.value().size()) {
    throw ShapeError(Describe("dot", a.shape(), b.shape()));
  }
  T s = 0;
  const T* pa = a.value().data();
  const T* pb = b.value().data();
  for (int64_t i = 0; i < a.value().size(); ++i) s += pa[i] * pb[i];
  Tape<T>* tape = a.tape();
  return tape->Record(
      "dot", Tensor<T>::Scalar(s), {a, b},
      [tape, a, b](const Tensor<T>& g, const Tensor<T>&) {
        const int64_t n = a.value().size();
        if (a.requires_grad()) {
          const T* pb = b.value().data();
          T* ga = tape->GradRef(a).data();
          for (int64_t i = 0; i < n; ++i) ga[i] += g[0] * pb[i];
        }
        if (b.requires_grad()) {
          const T* pa = a.value().data();
          T* gb = tape->GradRef(b).data();
          for (int64_t i = 0; i < n; ++i) gb[i] += g[0] * pa[i];
        }
      });
}

template <typename T>
Var<T> SumRows(const Var<T>& x) {
  const auto [rows, d] = RowsAndChannels(x.shape(), "sum_rows");
  Tensor<T> y({d});
  const T* px = x.value().data();
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < d; ++c) y[c] += px[r * d + c];
  }
  Tape<T>* tape = x.tape();
  return tape->Record("sum_rows", std::move(y), {x},
                      [tape, x, rows, d](const Tensor<T>& g, const Tensor<T>&) {
                        T* gx = tape->GradRef(x).data();
                        for (int64_t r = 0; r < rows; ++r) {
                          for (int64_t c = 0; c < d; ++c) gx[r * d + c] += g[c];
                        }
                      });
}

template <typename T>
Var<T> Linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const auto [rows, in] = RowsAndChannels(x.shape(), "linear");
  if (weight.rank() != 2 || weight.dim(1) != in) {
    throw ShapeError(Describe("linear", x.shape(), weight.shape()) +
                     " (weight must be [out, " + std::to_string(in) + "])");
  }
  const int64_t out = weight.dim(0);
  if (bias.valid() && (bias.rank() != 1 || bias.dim(0) != out)) {
    throw ShapeError(Describe("linear bias", weight.shape(), bias.shape()));
  }
  Shape out_shape = x.shape();
  out_shape.back() = out;
  Tensor<T> y(out_shape);
  ConstMatrixMap<T> xm(x.value().data(), rows, in);
  ConstMatrixMap<T> wm(weight.value().data(), out, in);
  MatrixMap<T> ym(y.data(), rows, out);
  ym.noalias() = xm * wm.transpose();
  if (bias.valid()) {
    const T* pb = bias.value().data();
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t c = 0; c < out; ++c) y[r * out + c] += pb[c];
    }
  }
  Tape<T>* tape = x.tape();
  return tape->Record(
      "linear", std::move(y), {x, weight, bias},
      [tape, x, weight, bias, rows, in, out](const Tensor<T>& g,
                                             const Tensor<T>&) {
        ConstMatrixMap<T> gm(g.data(), rows, out);
        if (x.requires_grad()) {
          ConstMatrixMap<T> wm(weight.value().data(), out, in);
          MatrixMap<T> gx(tape->GradRef(x).data(), rows, in);
          gx.noalias() += gm * wm;
        }
        if (weight.requires_grad()) {
          ConstMatrixMap<T> xm(x.value().data(), rows, in);
          MatrixMap<T> gw(tape->GradRef(weight).data(), out, in);
          gw.noalias() += gm.transpose() * xm;
        }
        if (bias.valid() && bias.requires_grad()) {
          T* gb = tape->GradRef(bias).data();
          for (int64_t r = 0; r < rows; ++r) {
            for (int64_t c = 0; c < out; ++c) gb[c] += g[r * out + c];
          }
        }
      });
}

template <typename T>
Var<T> Conv2d(const Var<T>& input, const Var<T>& kernel, const Var<T>& bias,
              const Conv2dGeometry& geo) {
  CheckGeometry(geo, "conv2d");
  if (input.rank() != 3 || kernel.rank() != 4) {
    throw ShapeError(Describe("conv2d", input.shape(), kernel.shape()) +
                     " (expected input [D_in,T,F], kernel [D_out,D_in,kT,kF])");
  }
  const int64_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int64_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) {
    throw ShapeError("conv2d: kernel input channels (axis 1) " +
                     std::to_string(kernel.dim(1)) + " != input channels (axis 0) " +
                     std::to_string(cin));
  }
  const int64_t hp = h + 2 * geo.padding[0], wp = w + 2 * geo.padding[1];
  if (kh > hp) {
    throw ShapeError("conv2d: kernel time extent " + std::to_string(kh) +
                     " exceeds padded input time axis " + std::to_string(hp));
  }
  if (kw > wp) {
    throw ShapeError("conv2d: kernel frequency extent " + std::to_string(kw) +
                     " exceeds padded input frequency axis " + std::to_string(wp));
  }
  if (bias.valid() && bias.value().size() != cout) {
    throw ShapeError(Describe("conv2d bias", kernel.shape(), bias.shape()));
  }
  const int64_t ho = (hp - kh) / geo.stride[0] + 1;
  const int64_t wo = (wp - kw) / geo.stride[1] + 1;
  const int64_t kdim = cin * kh * kw;
  std::vector<T> cols(kdim * ho * wo);
  Im2Col(input.value().data(), cin, h, w, kh, kw, geo, ho, wo, cols.data());
  Tensor<T> y({cout, ho, wo});
  ConstMatrixMap<T> km(kernel.value().data(), cout, kdim);
  ConstMatrixMap<T> cm(cols.data(), kdim, ho * wo);
  MatrixMap<T> ym(y.data(), cout, ho * wo);
  ym.noalias() = km * cm;
  if (bias.valid()) AddRowBias(y.data(), bias.value().data(), cout, ho * wo);
  Tape<T>* tape = input.tape();
  return tape->Record(
      "conv2d", std::move(y), {input, kernel, bias},
      [=](const Tensor<T>& g, const Tensor<T>&) {
        ConstMatrixMap<T> gm(g.data(), cout, ho * wo);
        if (kernel.requires_grad()) {
          std::vector<T> c2(kdim * ho * wo);
          Im2Col(input.value().data(), cin, h, w, kh, kw, geo, ho, wo, c2.data());
          ConstMatrixMap<T> cm2(c2.data(), kdim, ho * wo);
          MatrixMap<T> gk(tape->GradRef(kernel).data(), cout, kdim);
          gk.noalias() += gm * cm2.transpose();
        }
        if (input.requires_grad()) {
          ConstMatrixMap<T> km(kernel.value().data(), cout, kdim);
          std::vector<T> gc(kdim * ho * wo);
          MatrixMap<T> gcm(gc.data(), kdim, ho * wo);
          gcm.noalias() = km.transpose() * gm;
          Col2Im(gc.data(), cin, h, w, kh, kw, geo, ho, wo,
                 tape->GradRef(input).data());
        }
        if (bias.valid() && bias.requires_grad()) {
          AccumulateRowSums(g.data(), cout, ho * wo, tape->GradRef(bias).data());
        }
      });
}

template <typename T>
Var<T> Deconv2d(const Var<T>& input, const Var<T>& kernel, const Var<T>& bias,
                const Conv2dGeometry& geo) {
  CheckGeometry(geo, "deconv2d");
  if (input.rank() != 3 || kernel.rank() != 4) {
    throw ShapeError(Describe("deconv2d", input.shape(), kernel.shape()) +
                     " (expected input [C_in,T,F], kernel [C_in,C_out,kT,kF])");
  }
  const int64_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int64_t cout = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(0) != cin) {
    throw ShapeError("deconv2d: kernel input channels (axis 0) " +
                     std::to_string(kernel.dim(0)) + " != input channels (axis 0) " +
                     std::to_string(cin));
  }
  const int64_t ho = (h - 1) * geo.stride[0] - 2 * geo.padding[0] + kh;
  const int64_t wo = (w - 1) * geo.stride[1] - 2 * geo.padding[1] + kw;
  if (ho < 1) {
    throw ShapeError("deconv2d: non-positive output time axis " + std::to_string(ho));
  }
  if (wo < 1) {
    throw ShapeError("deconv2d: non-positive output frequency axis " +
                     std::to_string(wo));
  }
  if (bias.valid() && bias.value().size() != cout) {
    throw ShapeError(Describe("deconv2d bias", kernel.shape(), bias.shape()));
  }
  const int64_t kdim = cout * kh * kw;
  // The kernel viewed as a Conv2d kernel mapping [C_out, ho, wo] -> [C_in, h, w].
  std::vector<T> cols(kdim * h * w);
  ConstMatrixMap<T> km(kernel.value().data(), cin, kdim);
  ConstMatrixMap<T> xm(input.value().data(), cin, h * w);
  MatrixMap<T> cm(cols.data(), kdim, h * w);
  cm.noalias() = km.transpose() * xm;
  Tensor<T> y({cout, ho, wo});
  Col2Im(cols.data(), cout, ho, wo, kh, kw, geo, h, w, y.data());
  if (bias.valid()) AddRowBias(y.data(), bias.value().data(), cout, ho * wo);
  Tape<T>* tape = input.tape();
  return tape->Record(
      "deconv2d", std::move(y), {input, kernel, bias},
      [=](const Tensor<T>& g, const Tensor<T>&) {
        std::vector<T> gcols(kdim * h * w);
        Im2Col(g.data(), cout, ho, wo, kh, kw, geo, h, w, gcols.data());
        ConstMatrixMap<T> gcm(gcols.data(), kdim, h * w);
        if (input.requires_grad()) {
          ConstMatrixMap<T> km(kernel.value().data(), cin, kdim);
          MatrixMap<T> gx(tape->GradRef(input).data(), cin, h * w);
          gx.noalias() += km * gcm;
        }
        if (kernel.requires_grad()) {
          ConstMatrixMap<T> xm(input.value().data(), cin, h * w);
          MatrixMap<T> gk(tape->GradRef(kernel).data(), cin, kdim);
          gk.noalias() += xm * gcm.transpose();
        }
        if (bias.valid() && bias.requires_grad()) {
          AccumulateRowSums(g.data(), cout, ho * wo, tape->GradRef(bias).data());
        }
      });
}

template <typename T>
Var<T> GroupNorm(const Var<T>& input, int groups, const Var<T>& gamma,
                 const Var<T>& beta, double eps) {
  if (input.rank() != 3) {
    throw ShapeError("group_norm: expected [D,T,F], got " + ShapeString(input.shape()));
  }
  const int64_t d = input.dim(0);
  if (groups < 1 || d % groups != 0) {
    throw ConfigError("group_norm: channel count " + std::to_string(d) +
                      " not divisible by " + std::to_string(groups) + " groups");
  }
  if (gamma.value().size() != d || beta.value().size() != d) {
    throw ShapeError("group_norm: gamma/beta must have " + std::to_string(d) +
                     " entries");
  }
  const int64_t plane = input.dim(1) * input.dim(2);
  const int64_t per_group = (d / groups) * plane;
  const int64_t chans_per_group = d / groups;
  std::vector<T> mean(groups), rstd(groups);
  const T* px = input.value().data();
  Tensor<T> y(input.shape());
  const T* pg = gamma.value().data();
  const T* pb = beta.value().data();
  for (int grp = 0; grp < groups; ++grp) {
    const T* base = px + grp * per_group;
    double m = 0;
    for (int64_t i = 0; i < per_group; ++i) m += base[i];
    m /= per_group;
    double v = 0;
    for (int64_t i = 0; i < per_group; ++i) v += (base[i] - m) * (base[i] - m);
    v /= per_group;
    mean[grp] = static_cast<T>(m);
    rstd[grp] = static_cast<T>(1.0 / std::sqrt(v + eps));
    for (int64_t c = 0; c < chans_per_group; ++c) {
      const int64_t ch = grp * chans_per_group + c;
      for (int64_t i = 0; i < plane; ++i) {
        const int64_t idx = ch * plane + i;
        y[idx] = (px[idx] - mean[grp]) * rstd[grp] * pg[ch] + pb[ch];
      }
    }
  }
  Tape<T>* tape = input.tape();
  return tape->Record(
      "group_norm", std::move(y), {input, gamma, beta},
      [=](const Tensor<T>& g, const Tensor<T>&) {
        const T* px = input.value().data();
        const T* pgam = gamma.value().data();
        T* gx = input.requires_grad() ? tape->GradRef(input).data() : nullptr;
        T* ggam = gamma.requires_grad() ? tape->GradRef(gamma).data() : nullptr;
        T* gbet = beta.requires_grad() ? tape->GradRef(beta).data() : nullptr;
        for (int grp = 0; grp < groups; ++grp) {
          double sum_gh = 0, sum_ghx = 0;
          for (int64_t c = 0; c < chans_per_group; ++c) {
            const int64_t ch = grp * chans_per_group + c;
            double gsum = 0, gxs = 0;
            for (int64_t i = 0; i < plane; ++i) {
              const int64_t idx = ch * plane + i;
              const T xhat = (px[idx] - mean[grp]) * rstd[grp];
              gsum += g[idx];
              gxs += g[idx] * xhat;
              const double gh = g[idx] * pgam[ch];
              sum_gh += gh;
              sum_ghx += gh * xhat;
            }
            if (gbet) gbet[ch] += static_cast<T>(gsum);
            if (ggam) ggam[ch] += static_cast<T>(gxs);
          }
          if (!gx) continue;
          const T mgh = static_cast<T>(sum_gh / per_group);
          const T mghx = static_cast<T>(sum_ghx / per_group);
          for (int64_t c = 0; c < chans_per_group; ++c) {
            const int64_t ch = grp * chans_per_group + c;
            for (int64_t i = 0; i < plane; ++i) {
              const int64_t idx = ch * plane + i;
              const T xhat = (px[idx] - mean[grp]) * rstd[grp];
              gx[idx] += rstd[grp] * (g[idx] * pgam[ch] - mgh - xhat * mghx);
            }
          }
        }
      });
}

template <typename T>
Var<T> LayerNorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                 double eps) {
  const auto [rows, d] = RowsAndChannels(x.shape(), "layer_norm");
  if (gamma.value().size() != d || beta.value().size() != d) {
    throw ShapeError("layer_norm: gamma/beta must have " + std::to_string(d) +
                     " entries");
  }
  std::vector<T> mean(rows), rstd(rows);
  const T* px = x.value().data();
  const T* pg = gamma.value().data();
  const T* pb = beta.value().data();
  Tensor<T> y(x.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = px + r * d;
    T m = 0;
    for (int64_t c = 0; c < d; ++c) m += row[c];
    m /= static_cast<T>(d);
    T v = 0;
    for (int64_t c = 0; c < d; ++c) v += (row[c] - m) * (row[c] - m);
    v /= static_cast<T>(d);
    mean[r] = m;
    rstd[r] = T(1) / std::sqrt(v + static_cast<T>(eps));
    for (int64_t c = 0; c < d; ++c) {
      y[r * d + c] = (row[c] - m) * rstd[r] * pg[c] + pb[c];
    }
  }
  Tape<T>* tape = x.tape();
  return tape->Record(
      "layer_norm", std::move(y), {x, gamma, beta},
      [=](const Tensor<T>& g, const Tensor<T>&) {
        const T* px = x.value().data();
        const T* pgam = gamma.value().data();
        T* gx = x.requires_grad() ? tape->GradRef(x).data() : nullptr;
        T* ggam = gamma.requires_grad() ? tape->GradRef(gamma).data() : nullptr;
        T* gbet = beta.requires_grad() ? tape->GradRef(beta).data() : nullptr;
        for (int64_t r = 0; r < rows; ++r) {
          const T* row = px + r * d;
          const T* grow = g.data() + r * d;
          T sum_gh = 0, sum_ghx = 0;
          for (int64_t c = 0; c < d; ++c) {
            const T xhat = (row[c] - mean[r]) * rstd[r];
            if (gbet) gbet[c] += grow[c];
            if (ggam) ggam[c] += grow[c] * xhat;
            const T gh = grow[c] * pgam[c];
            sum_gh += gh;
            sum_ghx += gh * xhat;
          }
          if (!gx) continue;
          const T inv_d = T(1) / static_cast<T>(d);
          for (int64_t c = 0; c < d; ++c) {
            const T xhat = (row[c] - mean[r]) * rstd[r];
            gx[r * d + c] += rstd[r] * (grow[c] * pgam[c] - sum_gh * inv_d -
                                        xhat * sum_ghx * inv_d);
          }
        }
      });
}

template <typename T>
Var<T> SliceAxis(const Var<T>& x, int axis, int64_t start, int64_t length) {
  const Shape& s = x.shape();
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw IndexError("slice: axis " + std::to_string(axis) + " out of range for " +
                     ShapeString(s));
  }
  if (start < 0 || length < 0 || start + length > s[axis]) {
    throw IndexError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") out of bounds for axis " +
                     std::to_string(axis) + " of size " + std::to_string(s[axis]));
  }
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const int64_t n = s[axis];
  Shape out_shape = s;
  out_shape[axis] = length;
  Tensor<T> y(out_shape);
  const T* px = x.value().data();
  for (int64_t o = 0; o < outer; ++o) {
    std::copy(px + (o * n + start) * inner, px + (o * n + start + length) * inner,
              y.data() + o * length * inner);
  }
  Tape<T>* tape = x.tape();
  return tape->Record(
      "slice", std::move(y), {x},
      [=](const Tensor<T>& g, const Tensor<T>&) {
        T* gx = tape->GradRef(x).data();
        for (int64_t o = 0; o < outer; ++o) {
          const T* src = g.data() + o * length * inner;
          T* dst = gx + (o * n + start) * inner;
          for (int64_t i = 0; i < length * inner; ++i) dst[i] += src[i];
        }
      });
}

template <typename T>
Var<T> SliceTime(const Var<T>& input, int64_t start) {
  if (input.rank() != 3) {
    throw ShapeError("slice_time: expected [D,T,F], got " + ShapeString(input.shape()));
  }
  const int64_t frames = input.dim(1);
  if (start < 0 || start >= frames) {
    throw IndexError("slice_time: start frame " + std::to_string(start) +
                     " out of range [0, " + std::to_string(frames) + ")");
  }
  return SliceAxis(input, 1, start, frames - start);
}

template <typename T>
Var<T> Concat(const std::vector<Var<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis < 0 || axis >= static_cast<int>(s0.size())) {
    throw IndexError("concat: axis " + std::to_string(axis) + " out of range");
  }
  int64_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size()) throw ShapeError(Describe("concat", s0, s));
    for (size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != axis && s[i] != s0[i]) {
        throw ShapeError(Describe("concat", s0, s) + " (axis " + std::to_string(i) + ")");
      }
    }
    total += s[axis];
  }
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s0[i];
  for (size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
  Shape out_shape = s0;
  out_shape[axis] = total;
  Tensor<T> y(out_shape);
  std::vector<int64_t> offsets;
  int64_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const int64_t len = p.shape()[axis];
    const T* src = p.value().data();
    for (int64_t o = 0; o < outer; ++o) {
      std::copy(src + o * len * inner, src + (o + 1) * len * inner,
                y.data() + (o * total + off) * inner);
    }
    off += len;
  }
  Tape<T>* tape = parts[0].tape();
  return tape->Record(
      "concat", std::move(y), parts,
      [=](const Tensor<T>& g, const Tensor<T>&) {
        for (size_t k = 0; k < parts.size(); ++k) {
          const Var<T>& p = parts[k];
          if (!p.requires_grad()) continue;
          const int64_t len = p.shape()[axis];
          T* gp = tape->GradRef(p).data();
          for (int64_t o = 0; o < outer; ++o) {
            const T* src = g.data() + (o * total + offsets[k]) * inner;
            T* dst = gp + o * len * inner;
            for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
          }
        }
      });
}

template <typename T>
Var<T> Permute(const Var<T>& x, const std::vector<int>& perm) {
  const Shape& s = x.shape();
  const int rank = static_cast<int>(s.size());
  if (static_cast<int>(perm.size()) != rank) {
    throw ShapeError("permute: permutation rank mismatch for " + ShapeString(s));
  }
  std::vector<int64_t> in_strides(rank, 1);
  for (int i = rank - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * s[i + 1];
  Shape out_shape(rank);
  std::vector<int64_t> src_strides(rank);
  std::vector<bool> seen(rank, false);
  for (int i = 0; i < rank; ++i) {
    if (perm[i] < 0 || perm[i] >= rank || seen[perm[i]]) {
      throw ShapeError("permute: invalid permutation");
    }
    seen[perm[i]] = true;
    out_shape[i] = s[perm[i]];
    src_strides[i] = in_strides[perm[i]];
  }
  // Gather index table shared by forward and backward.
  const int64_t n = NumElements(s);
  auto index = std::make_shared<std::vector<int64_t>>(n);
  std::vector<int64_t> counter(rank, 0);
  int64_t src = 0;
  for (int64_t i = 0; i < n; ++i) {
    (*index)[i] = src;
    for (int ax = rank - 1; ax >= 0; --ax) {
      ++counter[ax];
      src += src_strides[ax];
      if (counter[ax] < out_shape[ax]) break;
      src -= src_strides[ax] * counter[ax];
      counter[ax] = 0;
    }
  }
  Tensor<T> y(out_shape);
  const T* px = x.value().data();
  for (int64_t i = 0; i < n; ++i) y[i] = px[(*index)[i]];
  Tape<T>* tape = x.tape();
  return tape->Record("permute", std::move(y), {x},
                      [tape, x, index](const Tensor<T>& g, const Tensor<T>&) {
                        T* gx = tape->GradRef(x).data();
                        const int64_t n = g.size();
                        for (int64_t i = 0; i < n; ++i) gx[(*index)[i]] += g[i];
                      });
}

template <typename T>
Var<T> Reshape(const Var<T>& x, Shape shape) {
  if (NumElements(shape) != x.value().size()) {
    throw ShapeError(Describe("reshape", x.shape(), shape));
  }
  Tape<T>* tape = x.tape();
  return tape->Record("reshape", x.value().Reshaped(std::move(shape)), {x},
                      [tape, x](const Tensor<T>& g, const Tensor<T>&) {
                        T* gx = tape->GradRef(x).data();
                        for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                      });
}

#define PROMPTSE_INSTANTIATE_OPS(T)                                            \
  template Var<T> Elementwise(ElementwiseKind, const Var<T>&, const Var<T>&);  \
  template Var<T> Affine(const Var<T>&, double, double);                       \
  template Var<T> AddChannels(const Var<T>&, const Var<T>&);                   \
  template Var<T> MulChannels(const Var<T>&, const Var<T>&);                   \
  template Var<T> Sum(const Var<T>&);                                          \
  template Var<T> Dot(const Var<T>&, const Var<T>&);                           \
  template Var<T> SumRows(const Var<T>&);                                      \
  template Var<T> Linear(const Var<T>&, const Var<T>&, const Var<T>&);         \
  template Var<T> Conv2d(const Var<T>&, const Var<T>&, const Var<T>&,          \
                         const Conv2dGeometry&);                               \
  template Var<T> Deconv2d(const Var<T>&, const Var<T>&, const Var<T>&,        \
                           const Conv2dGeometry&);                             \
  template Var<T> GroupNorm(const Var<T>&, int, const Var<T>&, const Var<T>&,  \
                            double);                                           \
  template Var<T> LayerNorm(const Var<T>&, const Var<T>&, const Var<T>&,       \
                            double);                                           \
  template Var<T> SliceAxis(const Var<T>&, int, int64_t, int64_t);             \
  template Var<T> SliceTime(const Var<T>&, int64_t);                           \
  template Var<T> Concat(const std::vector<Var<T>>&, int);                     \
  template Var<T> Permute(const Var<T>&, const std::vector<int>&);             \
  template Var<T> Reshape(const Var<T>&, Shape);

PROMPTSE_INSTANTIATE_OPS(float)
PROMPTSE_INSTANTIATE_OPS(double)

}  // namespace promptse::ops
