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

#include "promptse/numerics/recurrence.h"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "numerics/eigen_maps.h"

namespace promptse::ops {
namespace {

// Activations kept for the reverse pass, rows indexed by (step, batch).
template <typename T>
struct DirectionCache {
  RowMatrix<T> gates;  // [steps * batch, 4H]: i, f, g, o after nonlinearity
  RowMatrix<T> cells;  // [steps * batch, H]
};

// Logistic function through tanh, which Eigen vectorizes.
template <typename Derived>
auto Logistic(const Eigen::ArrayBase<Derived>& x) {
  using T = typename Derived::Scalar;
  return T(0.5) + T(0.5) * (T(0.5) * x).tanh();
}

struct Dims {
  int64_t batch, steps, in, hidden;
};

template <typename T>
void CheckWeights(const LstmWeights<T>& w, const Dims& d, const char* which) {
  const int64_t g = 4 * d.hidden;
  auto fail = [&](const std::string& what) {
    throw ShapeError(std::string("bidirectional_recurrence (") + which +
                     "): " + what);
  };
  if (!w.input_weight.valid() || !w.hidden_weight.valid() || !w.bias.valid()) {
    fail("missing weights");
  }
  if (w.input_weight.shape() != Shape{g, d.in}) {
    fail("input weight " + ShapeString(w.input_weight.shape()) + ", expected " +
         ShapeString({g, d.in}));
  }
  if (w.hidden_weight.shape() != Shape{g, d.hidden}) {
    fail("hidden weight " + ShapeString(w.hidden_weight.shape()) +
         ", expected " + ShapeString({g, d.hidden}));
  }
  if (w.bias.shape() != Shape{g}) {
    fail("bias " + ShapeString(w.bias.shape()) + ", expected " + ShapeString({g}));
  }
}

// Writes h_t into out[b, t, offset : offset + H] (row stride steps * 2H).
template <typename T>
void RunDirection(const T* x, const LstmWeights<T>& w, const Dims& d,
                  bool reverse, T* out, DirectionCache<T>* cache) {
  const int64_t h = d.hidden, g4 = 4 * h;
  const int64_t rows = d.batch * d.steps;
  RowMatrix<T> xg(rows, g4);
  ConstMatrixMap<T> xm(x, rows, d.in);
  ConstMatrixMap<T> wih(w.input_weight.value().data(), g4, d.in);
  ConstMatrixMap<T> whh(w.hidden_weight.value().data(), g4, h);
  xg.noalias() = xm * wih.transpose();
  xg.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(
      w.bias.value().data(), g4);

  cache->gates.resize(rows, g4);
  cache->cells.resize(rows, h);
  const int64_t offset = reverse ? h : 0;
  const int64_t out_stride = d.steps * 2 * h;
  RowMatrix<T> pre(d.batch, g4);
  for (int64_t s = 0; s < d.steps; ++s) {
    const int64_t t = reverse ? d.steps - 1 - s : s;
    const int64_t tp = reverse ? t + 1 : t - 1;
    pre = ConstStridedMap<T>(xg.data() + t * g4, d.batch, g4,
                             Eigen::OuterStride<>(d.steps * g4));
    if (s > 0) {
      ConstStridedMap<T> hprev(out + tp * 2 * h + offset, d.batch, h,
                               Eigen::OuterStride<>(out_stride));
      pre.noalias() += hprev * whh.transpose();
    }
    auto a = cache->gates.middleRows(t * d.batch, d.batch).array();
    auto c = cache->cells.middleRows(t * d.batch, d.batch).array();
    const auto p = pre.array();
    a.leftCols(2 * h) = Logistic(p.leftCols(2 * h));
    a.middleCols(2 * h, h) = p.middleCols(2 * h, h).tanh();
    a.rightCols(h) = Logistic(p.rightCols(h));
    if (s > 0) {
      c = a.middleCols(h, h) * cache->cells.middleRows(tp * d.batch, d.batch).array() +
          a.leftCols(h) * a.middleCols(2 * h, h);
    } else {
      c = a.leftCols(h) * a.middleCols(2 * h, h);
    }
    StridedMap<T>(out + t * 2 * h + offset, d.batch, h,
                  Eigen::OuterStride<>(out_stride))
        .array() = a.rightCols(h) * c.tanh();
  }
}

template <typename T>
void BackwardDirection(const T* x, const T* out, const T* gout,
                       const LstmWeights<T>& w, const Dims& d, bool reverse,
                       const DirectionCache<T>& cache, T* gx, Tape<T>* tape) {
  const int64_t h = d.hidden, g4 = 4 * h;
  const int64_t rows = d.batch * d.steps;
  const int64_t offset = reverse ? h : 0;
  const int64_t out_stride = d.steps * 2 * h;
  ConstMatrixMap<T> whh(w.hidden_weight.value().data(), g4, h);
  RowMatrix<T> dxg(rows, g4);
  RowMatrix<T> dh_next = RowMatrix<T>::Zero(d.batch, h);
  RowMatrix<T> dc_next = RowMatrix<T>::Zero(d.batch, h);
  RowMatrix<T> dgates(d.batch, g4);
  RowMatrix<T> dwhh = RowMatrix<T>::Zero(g4, h);
  Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tc, dh, dc;
  const bool need_whh = w.hidden_weight.requires_grad();
  for (int64_t s = d.steps - 1; s >= 0; --s) {
    const int64_t t = reverse ? d.steps - 1 - s : s;
    const int64_t tp = reverse ? t + 1 : t - 1;
    const auto a = cache.gates.middleRows(t * d.batch, d.batch).array();
    const auto ig = a.leftCols(h), fg = a.middleCols(h, h);
    const auto cg = a.middleCols(2 * h, h), og = a.rightCols(h);
    tc = cache.cells.middleRows(t * d.batch, d.batch).array().tanh();
    dh = ConstStridedMap<T>(gout + t * 2 * h + offset, d.batch, h,
                            Eigen::OuterStride<>(out_stride))
             .array() +
         dh_next.array();
    dc = dh * og * (T(1) - tc * tc) + dc_next.array();
    auto dg = dgates.array();
    dg.leftCols(h) = dc * cg * ig * (T(1) - ig);
    if (s > 0) {
      dg.middleCols(h, h) = dc * cache.cells.middleRows(tp * d.batch, d.batch).array() *
                            fg * (T(1) - fg);
    } else {
      dg.middleCols(h, h).setZero();
    }
    dg.middleCols(2 * h, h) = dc * ig * (T(1) - cg * cg);
    dg.rightCols(h) = dh * tc * og * (T(1) - og);
    dc_next.array() = dc * fg;
    StridedMap<T>(dxg.data() + t * g4, d.batch, g4,
                  Eigen::OuterStride<>(d.steps * g4)) = dgates;
    if (s > 0) {
      ConstStridedMap<T> hprev(out + tp * 2 * h + offset, d.batch, h,
                               Eigen::OuterStride<>(out_stride));
      if (need_whh) dwhh.noalias() += dgates.transpose() * hprev;
      dh_next.noalias() = dgates * whh;
    }
  }
  ConstMatrixMap<T> xm(x, rows, d.in);
  ConstMatrixMap<T> wih(w.input_weight.value().data(), g4, d.in);
  if (w.input_weight.requires_grad()) {
    MatrixMap<T> gw(tape->GradRef(w.input_weight).data(), g4, d.in);
    gw.noalias() += dxg.transpose() * xm;
  }
  if (need_whh) {
    MatrixMap<T>(tape->GradRef(w.hidden_weight).data(), g4, h) += dwhh;
  }
  if (gx) MatrixMap<T>(gx, rows, d.in).noalias() += dxg * wih;
  if (w.bias.requires_grad()) {
    T* gb = tape->GradRef(w.bias).data();
    for (int64_t r = 0; r < rows; ++r) {
      const T* row = dxg.data() + r * g4;
      for (int64_t j = 0; j < g4; ++j) gb[j] += row[j];
    }
  }
}

}  // namespace

template <typename T>
Var<T> BidirectionalLstm(const Var<T>& input, const LstmWeights<T>& forward,
                         const LstmWeights<T>& backward) {
  const Shape& s = input.shape();
  if (s.size() != 2 && s.size() != 3) {
    throw ShapeError("bidirectional_recurrence: expected [batch,steps,D_in] or "
                     "[steps,D_in], got " + ShapeString(s));
  }
  Dims d;
  d.batch = s.size() == 3 ? s[0] : 1;
  d.steps = s[s.size() - 2];
  d.in = s.back();
  if (d.steps < 1) throw ShapeError("bidirectional_recurrence: zero steps");
  if (!forward.hidden_weight.valid()) {
    throw ShapeError("bidirectional_recurrence: missing weights");
  }
  d.hidden = forward.hidden_weight.dim(1);
  CheckWeights(forward, d, "forward");
  CheckWeights(backward, d, "backward");

  Shape out_shape = s;
  out_shape.back() = 2 * d.hidden;
  Tensor<T> y(out_shape);
  auto fwd_cache = std::make_shared<DirectionCache<T>>();
  auto bwd_cache = std::make_shared<DirectionCache<T>>();
  const T* x = input.value().data();
  RunDirection(x, forward, d, false, y.data(), fwd_cache.get());
  RunDirection(x, backward, d, true, y.data(), bwd_cache.get());

  Tape<T>* tape = input.tape();
  return tape->Record(
      "bidirectional_recurrence", std::move(y),
      {input, forward.input_weight, forward.hidden_weight, forward.bias,
       backward.input_weight, backward.hidden_weight, backward.bias},
      [=](const Tensor<T>& g, const Tensor<T>& out) {
        const T* x = input.value().data();
        T* gx = input.requires_grad() ? tape->GradRef(input).data() : nullptr;
        for (int dir = 0; dir < 2; ++dir) {
          const LstmWeights<T>& w = dir == 0 ? forward : backward;
          const DirectionCache<T>& cache = dir == 0 ? *fwd_cache : *bwd_cache;
          const bool need_x = input.requires_grad();
          if (!need_x && !w.input_weight.requires_grad() &&
              !w.hidden_weight.requires_grad() && !w.bias.requires_grad()) {
            continue;
          }
          BackwardDirection(x, out.data(), g.data(), w, d, dir == 1, cache, gx,
                            tape);
        }
      });
}

template Var<float> BidirectionalLstm(const Var<float>&, const LstmWeights<float>&,
                                      const LstmWeights<float>&);
template Var<double> BidirectionalLstm(const Var<double>&,
                                       const LstmWeights<double>&,
                                       const LstmWeights<double>&);

}  // namespace promptse::ops
