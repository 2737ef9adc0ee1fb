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

// Named parameter tensors of the extraction network.
//
//   encoder.{weight,bias}                      [D, 2C+1, 3, 3], [D]
//   downsample.<g>.norm.{gamma,beta}           [D]
//   downsample.<g>.conv.{weight,bias}          [D, D, 3, 3], [D]
//   block.<j>.<unit>.norm.{gamma,beta}         [D]            unit: intra, inter
//   block.<j>.<unit>.rnn.<dir>.input_weight    [4H, D]        dir: fwd, bwd
//   block.<j>.<unit>.rnn.<dir>.hidden_weight   [4H, H]
//   block.<j>.<unit>.rnn.<dir>.bias            [4H]
//   block.<j>.<unit>.proj.{weight,bias}        [D, 2H], [D]
//   fusion.<j>.*                               per fusion kind
//   embedder.{layer1,layer2,out}.{weight,bias}
//   decoder.{weight,bias}                      [D, 2, 3, 3], [2]

#ifndef PROMPTSE_MODEL_PARAMS_H_
#define PROMPTSE_MODEL_PARAMS_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "promptse/dsp/stft.h"
#include "promptse/model/config.h"
#include "promptse/numerics/tape.h"

namespace promptse {

using ParamMap = std::map<std::string, Tensor<float>>;
using ShapeMap = std::map<std::string, Shape>;

// Every parameter the configuration needs, with its shape.
ShapeMap ParamShapes(const ModelConfig& config, const StftConfig& stft);

// Uniform(+-1/sqrt(fan_in)) weights; norms start at identity, the
// multiplicative fusion bias and FiLM scale bias at one.
ParamMap InitParams(const ModelConfig& config, const StftConfig& stft,
                    uint64_t seed);

// Throws DataError for missing, unexpected, misshapen or non-finite
// parameters.
void ValidateParams(const ParamMap& params, const ModelConfig& config,
                    const StftConfig& stft);

int64_t CountParams(const ParamMap& params);

// Parameters as tape leaves, keyed by name.
template <typename T>
class BoundParams {
 public:
  BoundParams() = default;
  BoundParams(Tape<T>& tape, const ParamMap& params, bool trainable);
  // Wraps existing leaves, e.g. the perturbed inputs of a gradient check.
  BoundParams(Tape<T>& tape, std::map<std::string, Var<T>> vars)
      : tape_(&tape), vars_(std::move(vars)) {}

  // Throws DataError when `name` is missing.
  const Var<T>& operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return vars_.count(name) > 0; }
  const std::map<std::string, Var<T>>& vars() const { return vars_; }
  Tape<T>* tape() const { return tape_; }

 private:
  Tape<T>* tape_ = nullptr;
  std::map<std::string, Var<T>> vars_;
};

}  // namespace promptse

#endif  // PROMPTSE_MODEL_PARAMS_H_
