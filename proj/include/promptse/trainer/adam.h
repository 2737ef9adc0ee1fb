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

// Bias-corrected Adam with global L2 gradient clipping.

#ifndef PROMPTSE_TRAINER_ADAM_H_
#define PROMPTSE_TRAINER_ADAM_H_

#include <cstdint>

#include "promptse/model/params.h"

namespace promptse {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamMap m;  // first moments, shaped like the parameters
  ParamMap v;  // second moments
  int64_t step = 0;
};

// Zero moments for every parameter.
AdamState InitAdam(const ParamMap& params);

double GlobalNorm(const ParamMap& grads);
bool AllFinite(const ParamMap& grads);

// Scales `grads` so their global L2 norm is at most `max_norm`. Returns the
// norm before clipping.
double ClipGlobalNorm(ParamMap& grads, double max_norm);

struct AdamStepResult {
  bool applied = false;  // false when a gradient was non-finite
  double grad_norm = 0;  // before clipping
};

// One update. Non-finite gradients leave params and state untouched.
// Throws ShapeError when names or shapes of params, grads and moments differ.
AdamStepResult AdamStep(ParamMap& params, ParamMap grads, AdamState& state,
                        double lr, double clip_norm, const AdamConfig& config = {});

}  // namespace promptse

#endif  // PROMPTSE_TRAINER_ADAM_H_
