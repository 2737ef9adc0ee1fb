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

#ifndef PROMPTSE_TRAINER_CONFIG_H_
#define PROMPTSE_TRAINER_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>

#include "promptse/objectives/objectives.h"
#include "promptse/parse.h"

namespace promptse {

struct TrainConfig {
  double lr0 = 5e-4;
  // Consecutive stagnant validation epochs before the learning rate halves.
  int64_t lr_halve_patience = 2;
  // A validation epoch is stagnant when it beats the best score by less
  // than this many dB.
  double stagnation_db = 0.01;
  int64_t max_epochs = 100;
  int64_t max_steps = 0;  // 0 means no step limit
  int64_t batch_size = 2;
  double grad_clip_l2 = 5.0;
  // Training aborts after more consecutive non-finite steps than this.
  int64_t max_nonfinite_steps = 10;
  LossConfig loss;
  // Share of negative pairs per epoch; unset picks 0.1 under log_mse and 0
  // under si_sdr.
  std::optional<double> neg_fraction;
  uint64_t seed = 0;

  double effective_neg_fraction() const;

  void Validate() const;
  // Keys "train.*" and "loss.*"; "train.neg_fraction" accepts "auto".
  void Set(const std::string& key, const std::string& value);
  KeyValues Items() const;

  bool operator==(const TrainConfig&) const = default;
};

}  // namespace promptse

#endif  // PROMPTSE_TRAINER_CONFIG_H_
