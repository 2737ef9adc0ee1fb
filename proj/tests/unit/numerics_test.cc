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

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "promptse/numerics/grad_check.h"
#include "promptse/numerics/ops.h"
#include "promptse/numerics/recurrence.h"
#include "test_util.h"

namespace promptse {
namespace {

using testing::Inner;
using testing::RandomTensor;
using V = Var<double>;

ops::Conv2dGeometry Geo(int64_t st, int64_t sf, int64_t pt, int64_t pf) {
  ops::Conv2dGeometry g;
  g.stride = {st, sf};
  g.padding = {pt, pf};
  return g;
}

// Brute-force sum over the output of a 2-D convolution of the input patch
// under each kernel tap, i.e. d sum(conv(x, k)) / d k.
Tensor<double> WindowSums(const Tensor<double>& x, int64_t dout, int64_t kt,
                          int64_t kf, const ops::Conv2dGeometry& geo) {
  const int64_t din = x.dim(0), t = x.dim(1), f = x.dim(2);
  const int64_t to = (t + 2 * geo.padding[0] - kt) / geo.stride[0] + 1;
  const int64_t fo = (f + 2 * geo.padding[1] - kf) / geo.stride[1] + 1;
  Tensor<double> out({dout, din, kt, kf});
  for (int64_t o = 0; o < dout; ++o)
    for (int64_t c = 0; c < din; ++c)
      for (int64_t a = 0; a < kt; ++a)
        for (int64_t b = 0; b < kf; ++b) {
          double s = 0;
          for (int64_t y = 0; y < to; ++y)
            for (int64_t z = 0; z < fo; ++z) {
              const int64_t iy = y * geo.stride[0] - geo.padding[0] + a;
              const int64_t iz = z * geo.stride[1] - geo.padding[1] + b;
              if (iy >= 0 && iy < t && iz >= 0 && iz < f) {
                s += x[(c * t + iy) * f + iz];
              }
            }
          out[((o * din + c) * kt + a) * kf + b] = s;
        }
  return out;
}

TEST(Conv2dTest, UnitKernelScalesInput) {
  Tape<double> tape;
  V x = tape.Constant(Tensor<double>::Filled({1, 4, 4}, 1.0));
  V k = tape.Constant(Tensor<double>::Filled({1, 1, 1, 1}, 2.0));
  V y = ops::Conv2d(x, k, V(), Geo(1, 1, 0, 0));
  EXPECT_EQ(y.shape(), (Shape{1, 4, 4}));
  for (double v : y.value().values()) EXPECT_DOUBLE_EQ(v, 2.0);
}

TEST(Conv2dTest, StridedPaddedOutputSize) {
  Tape<double> tape;
  V x = tape.Constant(Tensor<double>({1, 5, 3}));
  V k = tape.Constant(Tensor<double>({1, 1, 3, 3}));
  V y = ops::Conv2d(x, k, V(), Geo(2, 1, 1, 1));
  EXPECT_EQ(y.shape(), (Shape{1, 3, 3}));
}

TEST(Conv2dTest, KernelGradientEqualsWindowSums) {
  std::mt19937_64 rng(11);
  const auto geo = Geo(2, 1, 1, 1);
  Tensor<double> xv = RandomTensor({2, 7, 5}, rng);
  Tape<double> tape;
  V x = tape.Constant(xv);
  V k = tape.Variable(RandomTensor({3, 2, 3, 3}, rng));
  V loss = ops::Sum(ops::Conv2d(x, k, V(), geo));
  tape.Backward(loss);
  Tensor<double> g = tape.Grad(k);
  Tensor<double> expected = WindowSums(xv, 3, 3, 3, geo);
  for (int64_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], expected[i], 1e-12);

  GradCheckReport r = GradCheck(
      [&](Tape<double>&, const std::vector<V>& in) {
        return ops::Conv2d(in[0], in[1], V(), geo);
      },
      {xv, RandomTensor({3, 2, 3, 3}, rng)});
  EXPECT_TRUE(r.pass) << r.message;
  EXPECT_LT(r.max_rel_err, 1e-4);
}

TEST(Conv2dTest, ShapeErrorsNameTheAxis) {
  Tape<double> tape;
  V x = tape.Constant(Tensor<double>({2, 4, 4}));
  V k = tape.Constant(Tensor<double>({1, 3, 3, 3}));
  try {
    ops::Conv2d(x, k, V(), Geo(1, 1, 1, 1));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("channels"), std::string::npos);
  }
  V big = tape.Constant(Tensor<double>({2, 4, 4, 9}));
  V x2 = tape.Constant(Tensor<double>({4, 4, 4}));
  EXPECT_THROW(ops::Conv2d(x2, big, V(), Geo(1, 1, 0, 0)), ShapeError);
  V k2 = tape.Constant(Tensor<double>({1, 2, 3, 3}));
  EXPECT_THROW(ops::Conv2d(x, k2, V(), Geo(0, 1, 0, 0)), ShapeError);
}

TEST(Deconv2dTest, UnitKernelIsIdentity) {
  std::mt19937_64 rng(3);
  Tensor<double> xv = RandomTensor({1, 4, 6}, rng);
  Tape<double> tape;
  V y = ops::Deconv2d(tape.Constant(xv),
                      tape.Constant(Tensor<double>::Filled({1, 1, 1, 1}, 1.0)), V(),
                      Geo(1, 1, 0, 0));
  ASSERT_EQ(y.shape(), xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) EXPECT_DOUBLE_EQ(y.value()[i], xv[i]);
}

TEST(Deconv2dTest, OutputSizeFormula) {
  Tape<double> tape;
  V y = ops::Deconv2d(tape.Constant(Tensor<double>({1, 3, 3})),
                      tape.Constant(Tensor<double>({1, 1, 3, 3})), V(),
                      Geo(1, 1, 0, 0));
  EXPECT_EQ(y.shape(), (Shape{1, 5, 5}));
  V z = ops::Deconv2d(tape.Constant(Tensor<double>({2, 4, 3})),
                      tape.Constant(Tensor<double>({2, 3, 3, 3})), V(),
                      Geo(2, 1, 1, 1));
  EXPECT_EQ(z.shape(), (Shape{3, 7, 3}));
}

// <conv(x, k), y> == <x, deconv(y, k)> for random instances.
TEST(Deconv2dTest, AdjointOfConv2d) {
  std::mt19937_64 rng(5);
  const ops::Conv2dGeometry geos[] = {Geo(1, 1, 1, 1), Geo(2, 1, 1, 1),
                                      Geo(2, 2, 0, 1), Geo(1, 1, 0, 0)};
  for (const auto& geo : geos) {
    for (int trial = 0; trial < 3; ++trial) {
      Tensor<double> xv = RandomTensor({3, 9, 7}, rng);
      Tensor<double> kv = RandomTensor({4, 3, 3, 3}, rng);
      Tape<double> tape;
      V cx = ops::Conv2d(tape.Constant(xv), tape.Constant(kv), V(), geo);
      Tensor<double> yv = RandomTensor(cx.shape(), rng);
      V dy = ops::Deconv2d(tape.Constant(yv), tape.Constant(kv), V(), geo);
      // Strided transposed convolution may be shorter than x; pad with zeros.
      double rhs = 0;
      const int64_t t2 = dy.dim(1), f2 = dy.dim(2);
      for (int64_t c = 0; c < 3; ++c)
        for (int64_t t = 0; t < std::min<int64_t>(t2, 9); ++t)
          for (int64_t f = 0; f < std::min<int64_t>(f2, 7); ++f)
            rhs += xv[(c * 9 + t) * 7 + f] * dy.value()[(c * t2 + t) * f2 + f];
      const double lhs = Inner(cx.value(), yv);
      // Rows of x beyond the deconv output are never read by the conv.
      EXPECT_NEAR(lhs, rhs, 1e-6 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST(Deconv2dTest, GradCheck) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 3; ++trial) {
    GradCheckReport r = GradCheck(
        [](Tape<double>&, const std::vector<V>& in) {
          return ops::Deconv2d(in[0], in[1], in[2], Geo(1, 1, 1, 1));
        },
        {RandomTensor({2, 4, 5}, rng), RandomTensor({2, 3, 3, 3}, rng),
         RandomTensor({3}, rng)});
    EXPECT_TRUE(r.pass) << r.message;
  }
}

TEST(GroupNormTest, ConstantInputNormalisesToZero) {
  Tape<double> tape;
  V y = ops::GroupNorm(tape.Constant(Tensor<double>::Filled({4, 3, 2}, 7.5)), 2,
                       tape.Constant(Tensor<double>::Filled({4}, 1.0)),
                       tape.Constant(Tensor<double>({4})));
  for (double v : y.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(GroupNormTest, TwoValueInput) {
  Tape<double> tape;
  V y = ops::GroupNorm(tape.Constant(Tensor<double>({1, 1, 2}, {1.0, 3.0})), 1,
                       tape.Constant(Tensor<double>::Filled({1}, 1.0)),
                       tape.Constant(Tensor<double>({1})), 1e-5);
  const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(y.value()[0], -expected, 1e-12);
  EXPECT_NEAR(y.value()[1], expected, 1e-12);
}

TEST(GroupNormTest, ZeroGroupMeans) {
  std::mt19937_64 rng(2);
  Tape<double> tape;
  V y = ops::GroupNorm(tape.Constant(RandomTensor({6, 5, 4}, rng, -3, 5)), 3,
                       tape.Constant(Tensor<double>::Filled({6}, 1.0)),
                       tape.Constant(Tensor<double>({6})));
  for (int g = 0; g < 3; ++g) {
    double m = 0, v = 0;
    for (int64_t i = 0; i < 40; ++i) m += y.value()[g * 40 + i];
    m /= 40;
    for (int64_t i = 0; i < 40; ++i) v += std::pow(y.value()[g * 40 + i] - m, 2);
    EXPECT_NEAR(m, 0.0, 1e-5);
    EXPECT_NEAR(v / 40, 1.0, 1e-3);
  }
}

TEST(GroupNormTest, IndivisibleGroupsIsConfigError) {
  Tape<double> tape;
  EXPECT_THROW(ops::GroupNorm(tape.Constant(Tensor<double>({5, 2, 2})), 2,
                              tape.Constant(Tensor<double>({5})),
                              tape.Constant(Tensor<double>({5}))),
               ConfigError);
}

TEST(GroupNormTest, GradCheck) {
  std::mt19937_64 rng(4);
  for (int groups : {1, 2, 4}) {
    GradCheckReport r = GradCheck(
        [groups](Tape<double>&, const std::vector<V>& in) {
          // Weighted sum so the gradient w.r.t. the input is not identically 0.
          V y = ops::GroupNorm(in[0], groups, in[1], in[2]);
          return ops::Dot(y, in[3]);
        },
        {RandomTensor({4, 3, 5}, rng), RandomTensor({4}, rng),
         RandomTensor({4}, rng), RandomTensor({4, 3, 5}, rng)});
    EXPECT_TRUE(r.pass) << r.message;
  }
}

TEST(LayerNormTest, GradCheck) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 3; ++trial) {
    GradCheckReport r = GradCheck(
        [](Tape<double>&, const std::vector<V>& in) {
          return ops::Dot(ops::LayerNorm(in[0], in[1], in[2]), in[3]);
        },
        {RandomTensor({3, 4, 5}, rng), RandomTensor({5}, rng),
         RandomTensor({5}, rng), RandomTensor({3, 4, 5}, rng)});
    EXPECT_TRUE(r.pass) << r.message;
  }
}

struct LstmTensors {
  Tensor<double> wih, whh, b;
};

LstmTensors RandomLstm(int64_t in, int64_t h, std::mt19937_64& rng) {
  return {RandomTensor({4 * h, in}, rng), RandomTensor({4 * h, h}, rng),
          RandomTensor({4 * h}, rng)};
}

TEST(BidirectionalLstmTest, SingleStepDirectionsAgree) {
  std::mt19937_64 rng(9);
  LstmTensors w = RandomLstm(3, 4, rng);
  Tape<double> tape;
  ops::LstmWeights<double> lw{tape.Constant(w.wih), tape.Constant(w.whh),
                              tape.Constant(w.b)};
  V y = ops::BidirectionalLstm(tape.Constant(RandomTensor({1, 3}, rng)), lw, lw);
  ASSERT_EQ(y.shape(), (Shape{1, 8}));
  for (int j = 0; j < 4; ++j) EXPECT_EQ(y.value()[j], y.value()[4 + j]);
}

TEST(BidirectionalLstmTest, ZeroInputZeroBiasGivesZero) {
  std::mt19937_64 rng(10);
  LstmTensors w = RandomLstm(2, 3, rng);
  Tape<double> tape;
  ops::LstmWeights<double> lw{tape.Constant(w.wih), tape.Constant(w.whh),
                              tape.Constant(Tensor<double>({12}))};
  V y = ops::BidirectionalLstm(tape.Constant(Tensor<double>({4, 5, 2})), lw, lw);
  EXPECT_EQ(y.shape(), (Shape{4, 5, 6}));
  for (double v : y.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(BidirectionalLstmTest, BatchedEqualsPerSequence) {
  std::mt19937_64 rng(12);
  LstmTensors f = RandomLstm(2, 3, rng), b = RandomLstm(2, 3, rng);
  Tensor<double> x = RandomTensor({3, 4, 2}, rng);
  Tape<double> tape;
  ops::LstmWeights<double> fw{tape.Constant(f.wih), tape.Constant(f.whh),
                              tape.Constant(f.b)};
  ops::LstmWeights<double> bw{tape.Constant(b.wih), tape.Constant(b.whh),
                              tape.Constant(b.b)};
  V all = ops::BidirectionalLstm(tape.Constant(x), fw, bw);
  for (int64_t seq = 0; seq < 3; ++seq) {
    V xs = ops::SliceAxis(tape.Constant(x), 0, seq, 1);
    V one = ops::BidirectionalLstm(ops::Reshape(xs, {4, 2}), fw, bw);
    for (int64_t i = 0; i < 4 * 6; ++i) {
      EXPECT_NEAR(one.value()[i], all.value()[seq * 24 + i], 1e-14);
    }
  }
}

TEST(BidirectionalLstmTest, GradCheck) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 3; ++trial) {
    LstmTensors f = RandomLstm(2, 2, rng), b = RandomLstm(2, 2, rng);
    const Shape xs = trial == 0 ? Shape{3, 2} : Shape{2, 3, 2};
    Shape ys = xs;
    ys.back() = 4;
    GradCheckReport r = GradCheck(
        [](Tape<double>&, const std::vector<V>& in) {
          V y = ops::BidirectionalLstm(in[0], {in[1], in[2], in[3]},
                                       {in[4], in[5], in[6]});
          return ops::Dot(y, in[7]);
        },
        {RandomTensor(xs, rng), f.wih, f.whh, f.b, b.wih, b.whh, b.b,
         RandomTensor(ys, rng)});
    EXPECT_TRUE(r.pass) << r.message;
    EXPECT_LT(r.max_rel_err, 1e-4);
  }
}

TEST(ElementwiseTest, ReluValues) {
  Tape<double> tape;
  V y = ops::Relu(tape.Constant(Tensor<double>({2}, {-1.0, 2.0})));
  EXPECT_EQ(y.value()[0], 0.0);
  EXPECT_EQ(y.value()[1], 2.0);
}

TEST(ElementwiseTest, MulByOnesIsIdentity) {
  std::mt19937_64 rng(1);
  Tensor<double> a = RandomTensor({3, 4}, rng);
  Tape<double> tape;
  V y = ops::Mul(tape.Constant(a), tape.Constant(Tensor<double>::Filled({3, 4}, 1.0)));
  for (int64_t i = 0; i < a.size(); ++i) EXPECT_EQ(y.value()[i], a[i]);
}

TEST(ElementwiseTest, TrailingOneBroadcast) {
  Tape<double> tape;
  V a = tape.Constant(Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}));
  V b = tape.Constant(Tensor<double>({2, 1}, {10, 20}));
  V y = ops::Add(a, b);
  EXPECT_EQ(y.value()[2], 13.0);
  EXPECT_EQ(y.value()[3], 24.0);
  V c = tape.Constant(Tensor<double>({1, 3}));
  EXPECT_THROW(ops::Add(a, c), ShapeError);
  V d = tape.Constant(Tensor<double>({6}));
  EXPECT_THROW(ops::Mul(a, d), ShapeError);
}

TEST(ElementwiseTest, GradCheckAllKinds) {
  using K = ops::ElementwiseKind;
  std::mt19937_64 rng(21);
  for (K kind : {K::kAdd, K::kSub, K::kMul, K::kDiv}) {
    for (int trial = 0; trial < 3; ++trial) {
      const Shape bs = trial == 0 ? Shape{3, 4} : (trial == 1 ? Shape{3, 1} : Shape{1, 1});
      GradCheckReport r = GradCheck(
          [kind](Tape<double>&, const std::vector<V>& in) {
            return ops::Dot(ops::Elementwise(kind, in[0], in[1]), in[2]);
          },
          {RandomTensor({3, 4}, rng), RandomTensor(bs, rng, 0.5, 2.0),
           RandomTensor({3, 4}, rng)});
      EXPECT_TRUE(r.pass) << r.message;
    }
  }
  for (K kind : {K::kRelu, K::kSigmoid, K::kTanh, K::kLog, K::kSqrt, K::kSquare}) {
    for (int trial = 0; trial < 3; ++trial) {
      const bool positive = kind == K::kLog || kind == K::kSqrt;
      Tensor<double> x = RandomTensor({5, 3}, rng, positive ? 0.2 : -2.0, 2.0);
      if (kind == K::kRelu) {
        for (auto& v : x.values()) v += (v >= 0 ? 0.1 : -0.1);  // away from the kink
      }
      GradCheckReport r = GradCheck(
          [kind](Tape<double>&, const std::vector<V>& in) {
            return ops::Dot(ops::Elementwise(kind, in[0]), in[1]);
          },
          {x, RandomTensor({5, 3}, rng)});
      EXPECT_TRUE(r.pass) << r.message;
    }
  }
}

TEST(ChannelBroadcastTest, GradCheck) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 3; ++trial) {
    GradCheckReport r = GradCheck(
        [](Tape<double>&, const std::vector<V>& in) {
          V y = ops::MulChannels(ops::AddChannels(in[0], in[1]), in[2]);
          return ops::Dot(y, in[3]);
        },
        {RandomTensor({2, 3, 4}, rng), RandomTensor({4}, rng),
         RandomTensor({4}, rng), RandomTensor({2, 3, 4}, rng)});
    EXPECT_TRUE(r.pass) << r.message;
  }
}

TEST(LinearTest, GradCheckAndAdjoint) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 3; ++trial) {
    GradCheckReport r = GradCheck(
        [](Tape<double>&, const std::vector<V>& in) {
          return ops::Dot(ops::Linear(in[0], in[1], in[2]), in[3]);
        },
        {RandomTensor({2, 3, 5}, rng), RandomTensor({4, 5}, rng),
         RandomTensor({4}, rng), RandomTensor({2, 3, 4}, rng)});
    EXPECT_TRUE(r.pass) << r.message;
  }
  // Without bias the map x -> x W^T is linear; its adjoint is y -> y W.
  Tensor<double> x = RandomTensor({6, 5}, rng), y = RandomTensor({6, 4}, rng);
  Tensor<double> w = RandomTensor({4, 5}, rng);
  Tape<double> tape;
  V xv = tape.Variable(x);
  V out = ops::Dot(ops::Linear(xv, tape.Constant(w)), tape.Constant(y));
  tape.Backward(out);
  EXPECT_NEAR(out.value()[0], Inner(x, tape.Grad(xv)), 1e-12);
}

TEST(SliceTimeTest, StartZeroIsIdentity) {
  std::mt19937_64 rng(30);
  Tensor<double> x = RandomTensor({2, 5, 3}, rng);
  Tape<double> tape;
  V y = ops::SliceTime(tape.Constant(x), 0);
  EXPECT_EQ(y.shape(), x.shape());
  for (int64_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.value()[i], x[i]);
}

TEST(SliceTimeTest, KeepsTrailingFrames) {
  std::mt19937_64 rng(31);
  Tensor<double> x = RandomTensor({2, 10, 3}, rng);
  Tape<double> tape;
  V xv = tape.Variable(x);
  V y = ops::SliceTime(xv, 4);
  ASSERT_EQ(y.shape(), (Shape{2, 6, 3}));
  for (int64_t d = 0; d < 2; ++d)
    for (int64_t t = 0; t < 6; ++t)
      for (int64_t f = 0; f < 3; ++f)
        EXPECT_EQ(y.value()[(d * 6 + t) * 3 + f], x[(d * 10 + t + 4) * 3 + f]);
  tape.Backward(ops::Sum(y));
  Tensor<double> g = tape.Grad(xv);
  for (int64_t d = 0; d < 2; ++d)
    for (int64_t t = 0; t < 10; ++t)
      for (int64_t f = 0; f < 3; ++f)
        EXPECT_EQ(g[(d * 10 + t) * 3 + f], t >= 4 ? 1.0 : 0.0);
}

TEST(SliceTimeTest, OutOfRangeStart) {
  Tape<double> tape;
  V x = tape.Constant(Tensor<double>({1, 4, 2}));
  EXPECT_THROW(ops::SliceTime(x, 4), IndexError);
  EXPECT_THROW(ops::SliceTime(x, -1), IndexError);
}

TEST(LayoutOpsTest, PermuteConcatGradCheck) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 3; ++trial) {
    GradCheckReport r = GradCheck(
        [](Tape<double>&, const std::vector<V>& in) {
          V c = ops::Concat<double>({in[0], in[1]}, 1);
          V p = ops::Permute(c, {1, 2, 0});
          return ops::Dot(p, in[2]);
        },
        {RandomTensor({2, 3, 4}, rng), RandomTensor({2, 2, 4}, rng),
         RandomTensor({5, 4, 2}, rng)});
    EXPECT_TRUE(r.pass) << r.message;
  }
}

TEST(LayoutOpsTest, PermuteRoundTrip) {
  std::mt19937_64 rng(33);
  Tensor<double> x = RandomTensor({3, 4, 5}, rng);
  Tape<double> tape;
  V y = ops::Permute(ops::Permute(tape.Constant(x), {1, 2, 0}), {2, 0, 1});
  ASSERT_EQ(y.shape(), x.shape());
  for (int64_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.value()[i], x[i]);
  V p = ops::Permute(tape.Constant(x), {1, 2, 0});
  // p[t, f, d] == x[d, t, f]
  EXPECT_EQ(p.value()[(2 * 5 + 3) * 3 + 1], x[(1 * 4 + 2) * 5 + 3]);
}

TEST(GradCheckTest, AffineMapIsExact) {
  std::mt19937_64 rng(40);
  GradCheckReport r = GradCheck(
      [](Tape<double>&, const std::vector<V>& in) {
        return ops::Dot(ops::Affine(in[0], 3.0, 1.0), in[1]);
      },
      {RandomTensor({6}, rng), RandomTensor({6}, rng)});
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.max_rel_err, 1e-8);
}

TEST(GradCheckTest, CorruptedGradientFails) {
  std::mt19937_64 rng(41);
  // An op whose backward is off by a factor of two.
  auto broken = [](const V& a) {
    Tensor<double> y = a.value();
    for (auto& v : y.values()) v = v * v;
    Tape<double>* tape = a.tape();
    return tape->Record("broken_square", std::move(y), {a},
                        [tape, a](const Tensor<double>& g, const Tensor<double>&) {
                          Tensor<double>& ga = tape->GradRef(a);
                          for (int64_t i = 0; i < g.size(); ++i) {
                            ga[i] += g[i] * a.value()[i];
                          }
                        });
  };
  GradCheckReport r = GradCheck(
      [&](Tape<double>&, const std::vector<V>& in) { return broken(in[0]); },
      {RandomTensor({4}, rng, 0.5, 1.5)});
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.message.empty());
}

TEST(GradCheckTest, InjectedFaultFails) {
  std::mt19937_64 rng(42);
  GradCheckOptions opts;
  opts.fault_op = "conv2d";
  GradCheckReport r = GradCheck(
      [](Tape<double>&, const std::vector<V>& in) {
        return ops::Dot(ops::Conv2d(in[0], in[1], V(), Geo(1, 1, 1, 1)), in[2]);
      },
      {RandomTensor({1, 3, 3}, rng), RandomTensor({2, 1, 3, 3}, rng),
       RandomTensor({2, 3, 3}, rng)},
      opts);
  EXPECT_FALSE(r.pass);
}

TEST(GradCheckTest, NonFiniteIsReported) {
  GradCheckReport r = GradCheck(
      [](Tape<double>&, const std::vector<V>& in) { return ops::Log(in[0]); },
      {Tensor<double>({2}, {1.0, 0.0})});
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.message.empty());
}

TEST(TapeTest, SharedSubexpressionAccumulates) {
  std::mt19937_64 rng(50);
  Tensor<double> x = RandomTensor({5}, rng), y = RandomTensor({5}, rng);
  Tensor<double> shared_gx, dup_gx;
  {
    Tape<double> tape;
    V a = tape.Variable(x), b = tape.Variable(y);
    V s = ops::Mul(a, b);
    V out = ops::Sum(ops::Add(ops::Tanh(s), ops::Square(s)));
    tape.Backward(out);
    shared_gx = tape.Grad(a);
  }
  {
    Tape<double> tape;
    V a = tape.Variable(x), b = tape.Variable(y);
    V s1 = ops::Mul(a, b), s2 = ops::Mul(a, b);
    V out = ops::Sum(ops::Add(ops::Tanh(s1), ops::Square(s2)));
    tape.Backward(out);
    dup_gx = tape.Grad(a);
  }
  for (int64_t i = 0; i < 5; ++i) EXPECT_NEAR(shared_gx[i], dup_gx[i], 1e-15);
}

TEST(TapeTest, ReverseVisitsEachOpOnce) {
  Tape<double> tape;
  V a = tape.Variable(Tensor<double>::Filled({3}, 0.5));
  V b = ops::Sigmoid(a);
  V c = ops::Mul(b, a);
  V d = ops::Sum(ops::Add(c, b));
  tape.Backward(d);
  EXPECT_EQ(tape.backward_visits(), 4u);  // sigmoid, mul, add, sum
}

TEST(TapeTest, Determinism) {
  std::mt19937_64 rng(60);
  Tensor<double> x = RandomTensor({2, 6, 5}, rng), k = RandomTensor({3, 2, 3, 3}, rng);
  auto run = [&] {
    Tape<double> tape;
    V kv = tape.Variable(k);
    V y = ops::Sum(ops::Tanh(ops::Conv2d(tape.Constant(x), kv, V(), Geo(1, 1, 1, 1))));
    tape.Backward(y);
    return std::make_pair(y.value()[0], tape.Grad(kv));
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  EXPECT_EQ(v1, v2);
  for (int64_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g1[i], g2[i]);
}

}  // namespace
}  // namespace promptse
