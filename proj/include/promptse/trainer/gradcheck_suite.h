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

// Finite-difference check of the full extraction pipeline, one parameter
// tensor at a time, in double precision.

#ifndef PROMPTSE_TRAINER_GRADCHECK_SUITE_H_
#define PROMPTSE_TRAINER_GRADCHECK_SUITE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "promptse/dsp/stft.h"
#include "promptse/model/config.h"
#include "promptse/objectives/objectives.h"

namespace promptse {

// C=2, D=4, B=2, H=3, FiLM fusion, one downsampling stage.
ModelConfig TinyGradcheckModel();
// 1 kHz rate: 16-sample window, 8-sample hop, 9 bins.
StftConfig TinyGradcheckStft();

struct GradcheckSuiteOptions {
  LossKind loss = LossKind::kSiSdr;
  uint64_t seed = 1;
  double tolerance = 1e-3;
  int64_t mix_frames = 8;
  int64_t enroll_samples = 512;
  // Negates the backward pass of every op with this name (negative control).
  std::string fault_op;
};

struct GroupCheck {
  std::string name;
  double max_rel_err = 0;
  bool pass = false;
};

struct GradcheckSuiteReport {
  std::vector<GroupCheck> groups;
  bool pass = false;
  // One line per group, then a verdict line.
  std::string Format() const;
};

// Requires embed_dim <= 4, blocks == 2, mix_frames <= 8 and at most 9
// frequency bins (ConfigError otherwise). Under log_mse the target is
// non-silent, so the positive branch is checked.
GradcheckSuiteReport RunGradcheckSuite(const ModelConfig& model, const StftConfig& stft,
                                       const GradcheckSuiteOptions& options = {});

}  // namespace promptse

#endif  // PROMPTSE_TRAINER_GRADCHECK_SUITE_H_
