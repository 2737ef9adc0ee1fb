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

#include "promptse/trainer/config.h"

#include "promptse/error.h"

namespace promptse {

double TrainConfig::effective_neg_fraction() const {
  if (neg_fraction) return *neg_fraction;
  return loss.kind == LossKind::kLogMse ? 0.1 : 0.0;
}

void TrainConfig::Validate() const {
  loss.Validate();
  if (!(lr0 > 0)) throw ConfigError("train.lr0 must be positive");
  if (lr_halve_patience < 1) throw ConfigError("train.lr_halve_patience must be >= 1");
  if (!(stagnation_db >= 0)) throw ConfigError("train.stagnation_db must be non-negative");
  if (max_epochs < 0) throw ConfigError("train.max_epochs must be non-negative");
  if (max_steps < 0) throw ConfigError("train.max_steps must be non-negative");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(grad_clip_l2 > 0)) throw ConfigError("train.grad_clip_l2 must be positive");
  if (max_nonfinite_steps < 0) throw ConfigError("train.max_nonfinite_steps must be non-negative");
  const double f = effective_neg_fraction();
  if (!(f >= 0 && f < 1)) throw ConfigError("train.neg_fraction must lie in [0, 1)");
  if (loss.kind == LossKind::kSiSdr && f != 0) {
    throw ConfigError("train.neg_fraction must be 0 with loss.kind = si_sdr; "
                      "negative pairs have no SI-SDR target");
  }
}

void TrainConfig::Set(const std::string& key, const std::string& value) {
  if (key.rfind("loss.", 0) == 0) {
    loss.Set(key, value);
  } else if (key == "train.lr0") {
    lr0 = ParseDouble(key, value);
  } else if (key == "train.lr_halve_patience") {
    lr_halve_patience = ParseInt(key, value);
  } else if (key == "train.stagnation_db") {
    stagnation_db = ParseDouble(key, value);
  } else if (key == "train.max_epochs") {
    max_epochs = ParseInt(key, value);
  } else if (key == "train.max_steps") {
    max_steps = ParseInt(key, value);
  } else if (key == "train.batch_size") {
    batch_size = ParseInt(key, value);
  } else if (key == "train.grad_clip_l2") {
    grad_clip_l2 = ParseDouble(key, value);
  } else if (key == "train.max_nonfinite_steps") {
    max_nonfinite_steps = ParseInt(key, value);
  } else if (key == "train.neg_fraction") {
    if (value == "auto") {
      neg_fraction.reset();
    } else {
      neg_fraction = ParseDouble(key, value);
    }
  } else if (key == "train.seed") {
    const int64_t s = ParseInt(key, value);
    if (s < 0) throw ConfigError("train.seed must be non-negative");
    seed = static_cast<uint64_t>(s);
  } else {
    throw ConfigError("unknown key " + key);
  }
}

KeyValues TrainConfig::Items() const {
  KeyValues out = loss.Items();
  out["train.lr0"] = FormatDouble(lr0);
  out["train.lr_halve_patience"] = std::to_string(lr_halve_patience);
  out["train.stagnation_db"] = FormatDouble(stagnation_db);
  out["train.max_epochs"] = std::to_string(max_epochs);
  out["train.max_steps"] = std::to_string(max_steps);
  out["train.batch_size"] = std::to_string(batch_size);
  out["train.grad_clip_l2"] = FormatDouble(grad_clip_l2);
  out["train.max_nonfinite_steps"] = std::to_string(max_nonfinite_steps);
  out["train.neg_fraction"] = neg_fraction ? FormatDouble(*neg_fraction) : "auto";
  out["train.seed"] = std::to_string(seed);
  return out;
}

}  // namespace promptse
