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

// Differentiable operations recorded on a Tape. All ops are instantiated for
// float (training) and double (gradient checks).

#ifndef PROMPTSE_NUMERICS_OPS_H_
#define PROMPTSE_NUMERICS_OPS_H_

#include <array>
#include <vector>

#include "promptse/numerics/tape.h"

namespace promptse::ops {

enum class ElementwiseKind { kAdd, kSub, kMul, kDiv, kRelu, kSigmoid, kTanh,
                             kLog, kSqrt, kSquare };

// Binary kinds require `b` with a.shape, or a.shape with a suffix of axes
// replaced by 1 (trailing-1 broadcast). Unary kinds ignore `b`.
template <typename T>
Var<T> Elementwise(ElementwiseKind kind, const Var<T>& a,
                   const Var<T>& b = Var<T>());

template <typename T>
Var<T> Add(const Var<T>& a, const Var<T>& b) {
  return Elementwise(ElementwiseKind::kAdd, a, b);
}
template <typename T>
Var<T> Sub(const Var<T>& a, const Var<T>& b) {
  return Elementwise(ElementwiseKind::kSub, a, b);
}
template <typename T>
Var<T> Mul(const Var<T>& a, const Var<T>& b) {
  return Elementwise(ElementwiseKind::kMul, a, b);
}
template <typename T>
Var<T> Div(const Var<T>& a, const Var<T>& b) {
  return Elementwise(ElementwiseKind::kDiv, a, b);
}
template <typename T>
Var<T> Relu(const Var<T>& a) {
  return Elementwise(ElementwiseKind::kRelu, a);
}
template <typename T>
Var<T> Sigmoid(const Var<T>& a) {
  return Elementwise(ElementwiseKind::kSigmoid, a);
}
template <typename T>
Var<T> Tanh(const Var<T>& a) {
  return Elementwise(ElementwiseKind::kTanh, a);
}
template <typename T>
Var<T> Log(const Var<T>& a) {
  return Elementwise(ElementwiseKind::kLog, a);
}
template <typename T>
Var<T> Sqrt(const Var<T>& a) {
  return Elementwise(ElementwiseKind::kSqrt, a);
}
template <typename T>
Var<T> Square(const Var<T>& a) {
  return Elementwise(ElementwiseKind::kSquare, a);
}

// a * scale + shift with constant scalars.
template <typename T>
Var<T> Affine(const Var<T>& a, double scale, double shift = 0.0);

// Broadcast a per-channel vector v[D] over the leading axes of x[..., D].
template <typename T>
Var<T> AddChannels(const Var<T>& x, const Var<T>& v);
template <typename T>
Var<T> MulChannels(const Var<T>& x, const Var<T>& v);

// Reductions to shape {1}.
template <typename T>
Var<T> Sum(const Var<T>& a);
template <typename T>
Var<T> Dot(const Var<T>& a, const Var<T>& b);

// x[N, D] -> [D], summing over the leading axis.
template <typename T>
Var<T> SumRows(const Var<T>& x);

// y = x W^T + b over the last axis: x[..., in], weight[out, in], bias[out]
// (bias may be an invalid Var).
template <typename T>
Var<T> Linear(const Var<T>& x, const Var<T>& weight,
              const Var<T>& bias = Var<T>());

struct Conv2dGeometry {
  std::array<int64_t, 2> stride = {1, 1};
  std::array<int64_t, 2> padding = {0, 0};
};

// input[D_in, T, F], kernel[D_out, D_in, kT, kF], bias[D_out] (optional).
// Output [D_out, (T + 2pT - kT)/sT + 1, (F + 2pF - kF)/sF + 1].
template <typename T>
Var<T> Conv2d(const Var<T>& input, const Var<T>& kernel,
              const Var<T>& bias, const Conv2dGeometry& geometry);

// Transposed convolution: the input-gradient operator of Conv2d with the same
// kernel. input[C_in, T, F], kernel[C_in, C_out, kT, kF], bias[C_out].
// Output [C_out, (T - 1) sT - 2 pT + kT, (F - 1) sF - 2 pF + kF].
template <typename T>
Var<T> Deconv2d(const Var<T>& input, const Var<T>& kernel,
                const Var<T>& bias, const Conv2dGeometry& geometry);

// input[D, T, F] normalised per group of D/groups channels over (channels,
// T, F), then scaled by gamma[D] and shifted by beta[D].
template <typename T>
Var<T> GroupNorm(const Var<T>& input, int groups, const Var<T>& gamma,
                 const Var<T>& beta, double eps = 1e-5);

// Normalises every vector along the last axis of x[..., D].
template <typename T>
Var<T> LayerNorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                 double eps = 1e-5);

// Copies `length` entries of `axis` starting at `start`.
template <typename T>
Var<T> SliceAxis(const Var<T>& x, int axis, int64_t start, int64_t length);

// input[D, T, F] -> input[:, start:, :].
template <typename T>
Var<T> SliceTime(const Var<T>& input, int64_t start);

template <typename T>
Var<T> Concat(const std::vector<Var<T>>& parts, int axis);

// out.shape[i] = x.shape[perm[i]].
template <typename T>
Var<T> Permute(const Var<T>& x, const std::vector<int>& perm);

template <typename T>
Var<T> Reshape(const Var<T>& x, Shape shape);

}  // namespace promptse::ops

#endif  // PROMPTSE_NUMERICS_OPS_H_
