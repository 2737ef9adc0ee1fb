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

#ifndef PROMPTSE_DSP_FEATURES_H_
#define PROMPTSE_DSP_FEATURES_H_

#include <cstdint>

#include "promptse/dsp/stft.h"
#include "promptse/numerics/tape.h"
#include "promptse/numerics/tensor.h"

namespace promptse {

// Mixture with the enrollment copied in front of every channel.
template <typename T>
struct PromptedMixture {
  Tensor<T> signal;  // [C, E + N]
  int64_t enroll_samples = 0;
  int64_t mix_samples = 0;
  int64_t enroll_frames = 0;  // E / hop
  int64_t mix_frames = 0;     // ceil(N / hop)
};

// enrollment: [E], mixture: [C, N]. E must be a positive hop multiple
// (DataError otherwise).
template <typename T>
PromptedMixture<T> PrependEnrollment(const Tensor<T>& enrollment,
                                     const Tensor<T>& mixture,
                                     const StftConfig& config);

// Drops trailing samples so the length is a hop multiple. DataError when
// fewer than one hop remains.
template <typename T>
Tensor<T> TrimToHop(const Tensor<T>& signal, int64_t hop);

// [2, C, T, F] -> [2C + 1, T, F]: real parts, imaginary parts, then the
// magnitude of `ref_channel`.
template <typename T>
Tensor<T> StackRiMag(const Tensor<T>& spec, int64_t ref_channel = 0);

namespace ops {

template <typename T>
Var<T> StackRiMag(const Var<T>& spec, int64_t ref_channel = 0);

// |re + i im| for a [2, ...] tensor; gradient taken as zero where the
// magnitude vanishes.
template <typename T>
Var<T> Magnitude(const Var<T>& spec);

}  // namespace ops
}  // namespace promptse

#endif  // PROMPTSE_DSP_FEATURES_H_
