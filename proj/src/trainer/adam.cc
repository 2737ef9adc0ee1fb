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

#include "promptse/trainer/adam.h"

#include <cmath>

#include "promptse/error.h"

namespace promptse {
namespace {

void CheckAligned(const ParamMap& params, const ParamMap& other, const char* what) {
  if (params.size() != other.size()) {
    throw ShapeError(std::string("adam: ") + what + " has " + std::to_string(other.size()) +
                     " tensors, parameters " + std::to_string(params.size()));
  }
  for (const auto& [name, p] : params) {
    const auto it = other.find(name);
    if (it == other.end()) throw ShapeError(std::string("adam: ") + what + " lacks " + name);
    if (it->second.shape() != p.shape()) {
      throw ShapeError(std::string("adam: ") + what + " " + name + " has shape " +
                       ShapeString(it->second.shape()) + ", parameter " + ShapeString(p.shape()));
    }
  }
}

}  // namespace

AdamState InitAdam(const ParamMap& params) {
  AdamState s;
  for (const auto& [name, p] : params) {
    s.m.emplace(name, Tensor<float>(p.shape()));
    s.v.emplace(name, Tensor<float>(p.shape()));
  }
  return s;
}

double GlobalNorm(const ParamMap& grads) {
  double sq = 0;
  for (const auto& [name, g] : grads) {
    for (float x : g.values()) sq += double(x) * double(x);
  }
  return std::sqrt(sq);
}

bool AllFinite(const ParamMap& grads) {
  for (const auto& [name, g] : grads) {
    if (!AllFinite(g)) return false;
  }
  return true;
}

double ClipGlobalNorm(ParamMap& grads, double max_norm) {
  const double norm = GlobalNorm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [name, g] : grads) {
      for (float& x : g.values()) x = float(double(x) * scale);
    }
  }
  return norm;
}

AdamStepResult AdamStep(ParamMap& params, ParamMap grads, AdamState& state,
                        double lr, double clip_norm, const AdamConfig& config) {
  CheckAligned(params, grads, "gradient map");
  CheckAligned(params, state.m, "first moment map");
  CheckAligned(params, state.v, "second moment map");
  AdamStepResult result;
  if (!AllFinite(grads)) return result;
  result.grad_norm = ClipGlobalNorm(grads, clip_norm);
  result.applied = true;
  const int64_t t = ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, double(t));
  const double c2 = 1.0 - std::pow(config.beta2, double(t));
  for (auto& [name, p] : params) {
    const Tensor<float>& g = grads.at(name);
    Tensor<float>& m = state.m.at(name);
    Tensor<float>& v = state.v.at(name);
    for (int64_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      const double vi = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      m[i] = float(mi);
      v[i] = float(vi);
      p[i] = float(p[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + config.eps));
    }
  }
  return result;
}

}  // namespace promptse
