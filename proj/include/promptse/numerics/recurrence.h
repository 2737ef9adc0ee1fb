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

#ifndef PROMPTSE_NUMERICS_RECURRENCE_H_
#define PROMPTSE_NUMERICS_RECURRENCE_H_

#include "promptse/numerics/tape.h"

namespace promptse::ops {

// Weights of one LSTM direction. Gate rows are ordered input, forget,
// candidate, output: input_weight[4H, D_in], hidden_weight[4H, H], bias[4H].
template <typename T>
struct LstmWeights {
  Var<T> input_weight;
  Var<T> hidden_weight;
  Var<T> bias;
};

// Runs a forward and a backward LSTM over the step axis of
// input[batch, steps, D_in] (or [steps, D_in]) from zero state and
// concatenates the hidden states: [batch, steps, 2H] (or [steps, 2H]).
// Forward direction occupies [..., 0:H], backward [..., H:2H].
template <typename T>
Var<T> BidirectionalLstm(const Var<T>& input, const LstmWeights<T>& forward,
                         const LstmWeights<T>& backward);

}  // namespace promptse::ops

#endif  // PROMPTSE_NUMERICS_RECURRENCE_H_
