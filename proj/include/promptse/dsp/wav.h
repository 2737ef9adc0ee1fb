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

// Little-endian RIFF/WAVE reading and writing for 16-bit PCM and 32-bit
// float samples.

#ifndef PROMPTSE_DSP_WAV_H_
#define PROMPTSE_DSP_WAV_H_

#include <string>

#include "promptse/numerics/tensor.h"

namespace promptse {

struct Waveform {
  int sample_rate = 8000;
  Tensor<float> samples;  // [C, N], nominally within [-1, 1]

  int64_t channels() const { return samples.rank() == 2 ? samples.dim(0) : 0; }
  int64_t length() const { return samples.rank() == 2 ? samples.dim(1) : 0; }
};

enum class WavFormat { kPcm16, kFloat32 };

// Throws DataError on I/O failure, malformed files or unsupported encodings.
Waveform ReadWav(const std::string& path);

// As above, and also when the file's rate differs from `expected_rate`.
Waveform ReadWav(const std::string& path, int expected_rate);

// PCM output is clipped to [-1, 1]. Writes to a temporary sibling and
// renames it into place.
void WriteWav(const std::string& path, const Waveform& wave,
              WavFormat format = WavFormat::kFloat32);

}  // namespace promptse

#endif  // PROMPTSE_DSP_WAV_H_
