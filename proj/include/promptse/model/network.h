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

// Forward pass of the prompted extraction network. Feature tensors are
// [D, T, F] unless noted; the grid blocks run channels-last internally.

#ifndef PROMPTSE_MODEL_NETWORK_H_
#define PROMPTSE_MODEL_NETWORK_H_

#include <string>

#include "promptse/dsp/stft.h"
#include "promptse/model/config.h"
#include "promptse/model/params.h"
#include "promptse/numerics/tape.h"

namespace promptse::model {

// [2C+1, T, F] -> [D, T, F].
template <typename T>
Var<T> Encode(const BoundParams<T>& p, const ModelConfig& config,
              const Var<T>& features);

// [D, Te, F] -> [D, ceil(Te / 2^G), F]. ConfigError when Te < 2^G.
template <typename T>
Var<T> DownsampleEnrollment(const BoundParams<T>& p, const ModelConfig& config,
                            const Var<T>& enroll);

// Unit-norm [K] embedding of an enrollment waveform [E]. DataError when the
// enrollment is shorter than half a second.
template <typename T>
Var<T> SpeakerEmbedding(const BoundParams<T>& p, const ModelConfig& config,
                        const StftConfig& stft, const Tensor<T>& enrollment);

// Fusion after block `index` (0-based) on z [D, T, F] with embedding v [K].
template <typename T>
Var<T> Fuse(const BoundParams<T>& p, const ModelConfig& config, int64_t index,
            const Var<T>& z, const Var<T>& v);

// Intra-frame then sub-band temporal unit of block `index`.
template <typename T>
Var<T> GridBlock(const BoundParams<T>& p, const ModelConfig& config,
                 int64_t index, const Var<T>& z);

// Runs all blocks on u [D, T', F], keeping the last `mix_frames` frames
// after the enrollment blocks. `v` is required when fusion is enabled.
template <typename T>
Var<T> ForwardBlocks(const BoundParams<T>& p, const ModelConfig& config,
                     const Var<T>& u, int64_t mix_frames, const Var<T>& v);

// [D, T, F] -> [2, T, F] real and imaginary parts.
template <typename T>
Var<T> Decode(const BoundParams<T>& p, const ModelConfig& config,
              const Var<T>& z);

template <typename T>
struct ExtractOutput {
  Var<T> waveform;     // [N]
  Var<T> spectrogram;  // [2, T_mix, F]
  Var<T> embedding;    // [K], invalid without fusion
  int64_t enroll_frames = 0;
  int64_t enroll_frames_downsampled = 0;
  int64_t mix_frames = 0;
};

// Full pipeline from a mixture [C, N] and an enrollment [E] (trimmed to a
// hop multiple) to the target estimate [N]. The prompted signal is scaled
// by the mixture RMS on the way in and the estimate rescaled on the way out.
template <typename T>
ExtractOutput<T> Extract(const BoundParams<T>& p, const ModelConfig& config,
                         const StftConfig& stft, const Tensor<T>& mixture,
                         const Tensor<T>& enrollment);

// Convenience inference wrapper on a private tape.
Tensor<float> ExtractWaveform(const ParamMap& params, const ModelConfig& config,
                              const StftConfig& stft, const Tensor<float>& mixture,
                              const Tensor<float>& enrollment);

}  // namespace promptse::model

#endif  // PROMPTSE_MODEL_NETWORK_H_
