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

#include "promptse/dsp/features.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "promptse/numerics/ops.h"

namespace promptse {
namespace {

void CheckSpec(const Shape& s, int64_t ref_channel) {
  if (s.size() != 4 || s[0] != 2) {
    throw ShapeError("stack_ri_mag: expected [2, C, T, F], got " + ShapeString(s));
  }
  if (ref_channel < 0 || ref_channel >= s[1]) {
    throw IndexError("stack_ri_mag: reference channel " +
                     std::to_string(ref_channel) + " outside [0, " +
                     std::to_string(s[1]) + ")");
  }
}

}  // namespace

template <typename T>
PromptedMixture<T> PrependEnrollment(const Tensor<T>& enrollment,
                                     const Tensor<T>& mixture,
                                     const StftConfig& config) {
  if (enrollment.rank() != 1) {
    throw ShapeError("prepend_enrollment: enrollment must be [E], got " +
                     ShapeString(enrollment.shape()));
  }
  if (mixture.rank() != 2) {
    throw ShapeError("prepend_enrollment: mixture must be [C, N], got " +
                     ShapeString(mixture.shape()));
  }
  const int64_t e = enrollment.dim(0), c = mixture.dim(0), n = mixture.dim(1);
  if (e <= 0 || n <= 0 || c <= 0) {
    throw DataError("prepend_enrollment: empty enrollment or mixture");
  }
  if (e % config.hop_length != 0) {
    throw DataError("prepend_enrollment: enrollment length " + std::to_string(e) +
                    " is not a multiple of hop " +
                    std::to_string(config.hop_length));
  }
  PromptedMixture<T> out;
  out.signal = Tensor<T>({c, e + n});
  for (int64_t ch = 0; ch < c; ++ch) {
    T* dst = out.signal.data() + ch * (e + n);
    std::copy(enrollment.data(), enrollment.data() + e, dst);
    std::copy(mixture.data() + ch * n, mixture.data() + (ch + 1) * n, dst + e);
  }
  out.enroll_samples = e;
  out.mix_samples = n;
  out.enroll_frames = e / config.hop_length;
  out.mix_frames = config.NumFrames(n);
  return out;
}

template <typename T>
Tensor<T> TrimToHop(const Tensor<T>& signal, int64_t hop) {
  if (signal.rank() != 1) {
    throw ShapeError("trim: expected [samples], got " + ShapeString(signal.shape()));
  }
  const int64_t kept = signal.dim(0) / hop * hop;
  if (kept == 0) {
    throw DataError("trim: signal of " + std::to_string(signal.dim(0)) +
                    " samples is shorter than one hop");
  }
  return Tensor<T>({kept}, std::vector<T>(signal.data(), signal.data() + kept));
}

template <typename T>
Tensor<T> StackRiMag(const Tensor<T>& spec, int64_t ref_channel) {
  CheckSpec(spec.shape(), ref_channel);
  const int64_t c = spec.dim(1), t = spec.dim(2), f = spec.dim(3);
  const int64_t plane = t * f;
  Tensor<T> out({2 * c + 1, t, f});
  std::copy(spec.data(), spec.data() + spec.size(), out.data());
  const T* re = spec.data() + ref_channel * plane;
  const T* im = spec.data() + (c + ref_channel) * plane;
  T* mag = out.data() + 2 * c * plane;
  for (int64_t i = 0; i < plane; ++i) mag[i] = std::hypot(re[i], im[i]);
  return out;
}

namespace ops {

template <typename T>
Var<T> Magnitude(const Var<T>& spec) {
  if (spec.rank() < 1 || spec.dim(0) != 2) {
    throw ShapeError("magnitude: expected leading axis of 2, got " +
                     ShapeString(spec.shape()));
  }
  const int64_t half = spec.value().size() / 2;
  Shape out_shape(spec.shape().begin() + 1, spec.shape().end());
  Tensor<T> y(out_shape);
  const T* p = spec.value().data();
  for (int64_t i = 0; i < half; ++i) y[i] = std::hypot(p[i], p[half + i]);
  Tape<T>* tape = spec.tape();
  return tape->Record(
      "magnitude", std::move(y), {spec},
      [tape, spec, half](const Tensor<T>& g, const Tensor<T>& out) {
        const T* p = spec.value().data();
        T* gs = tape->GradRef(spec).data();
        for (int64_t i = 0; i < half; ++i) {
          if (out[i] > T(0)) {
            gs[i] += g[i] * p[i] / out[i];
            gs[half + i] += g[i] * p[half + i] / out[i];
          }
        }
      });
}

template <typename T>
Var<T> StackRiMag(const Var<T>& spec, int64_t ref_channel) {
  CheckSpec(spec.shape(), ref_channel);
  const int64_t c = spec.dim(1), t = spec.dim(2), f = spec.dim(3);
  Var<T> ri = Reshape(spec, {2 * c, t, f});
  Var<T> ref = Concat<T>({SliceAxis(ri, 0, ref_channel, 1),
                          SliceAxis(ri, 0, c + ref_channel, 1)},
                         0);
  return Concat<T>({ri, Reshape(Magnitude(ref), {1, t, f})}, 0);
}

}  // namespace ops

#define PROMPTSE_INSTANTIATE_FEATURES(T)                                      \
  template PromptedMixture<T> PrependEnrollment(                              \
      const Tensor<T>&, const Tensor<T>&, const StftConfig&);                 \
  template Tensor<T> TrimToHop(const Tensor<T>&, int64_t);                    \
  template Tensor<T> StackRiMag(const Tensor<T>&, int64_t);                   \
  template Var<T> ops::Magnitude(const Var<T>&);                              \
  template Var<T> ops::StackRiMag(const Var<T>&, int64_t);

PROMPTSE_INSTANTIATE_FEATURES(float)
PROMPTSE_INSTANTIATE_FEATURES(double)

}  // namespace promptse
