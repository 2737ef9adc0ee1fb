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

#ifndef PROMPTSE_MODEL_FLOPS_H_
#define PROMPTSE_MODEL_FLOPS_H_

#include <cstdint>

#include "promptse/dsp/stft.h"
#include "promptse/model/config.h"

namespace promptse {

// Multiply-accumulate counts of one forward pass, by stage.
struct FlopBreakdown {
  double encoder = 0;
  double downsampler = 0;
  double blocks = 0;
  double fusion = 0;
  double embedder = 0;
  double decoder = 0;
  double total = 0;
  double per_second = 0;  // total / mixture seconds
  int64_t enroll_frames = 0;
  int64_t enroll_frames_downsampled = 0;
  int64_t mix_frames = 0;
};

// Per T-F unit cost of one grid block (two recurrent units).
double BlockMacsPerUnit(const ModelConfig& config);

// Analytic count for a mixture of `mix_seconds` prompted with an enrollment
// of `enroll_seconds` (trimmed to a hop multiple).
FlopBreakdown EstimateFlops(const ModelConfig& config, const StftConfig& stft,
                            double mix_seconds, double enroll_seconds);

}  // namespace promptse

#endif  // PROMPTSE_MODEL_FLOPS_H_
