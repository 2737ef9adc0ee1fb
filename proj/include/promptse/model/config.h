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

#ifndef PROMPTSE_MODEL_CONFIG_H_
#define PROMPTSE_MODEL_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "promptse/parse.h"

namespace promptse {

enum class FusionKind { kNone, kConcatenation, kAddition, kMultiplication, kFilm };

// Throws ConfigError for unknown names.
FusionKind ParseFusionKind(const std::string& name);
const char* FusionKindName(FusionKind kind);

// Architecture hyperparameters of the extraction network.
struct ModelConfig {
  int64_t channels = 2;           // C
  int64_t embed_dim = 16;         // D
  int64_t blocks = 2;             // B
  int64_t enroll_blocks = 2;      // blocks that see the enrollment frames
  int64_t downsample_depth = 0;   // G, 0 disables the downsampler
  FusionKind fusion = FusionKind::kNone;
  int64_t speaker_dim = 192;      // K
  int64_t hidden = 32;            // H, recurrence width per direction
  int64_t unfold_kernel = 1;      // I
  int64_t unfold_stride = 1;      // J
  int64_t embedder_hidden = 64;
  int64_t norm_groups = 1;
  int64_t ref_channel = 0;        // channel whose magnitude is stacked

  // Reference-scale configurations (too large to train here).
  static ModelConfig V1();
  static ModelConfig V2();

  // Throws ConfigError on the first violated constraint.
  void Validate() const;

  // Flat `model.*` keys. Set throws ConfigError for unknown keys.
  void Set(const std::string& key, const std::string& value);
  KeyValues Items() const;
  static ModelConfig FromItems(const KeyValues& items);

  bool operator==(const ModelConfig&) const = default;
};

// 0-based indices of the blocks whose output is fused with the speaker
// embedding: every block after the enrollment blocks, or the last block when
// all blocks see the enrollment. Empty without fusion.
std::vector<int64_t> FusionBlockIndices(const ModelConfig& config);

// Downsampler depth that maps an enrollment of `enroll_seconds` to roughly
// `target_seconds`: log2(floor(E / E')), which must be a whole number.
int64_t DownsampleDepthFor(double enroll_seconds, double target_seconds);

}  // namespace promptse

#endif  // PROMPTSE_MODEL_CONFIG_H_
