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

#ifndef PROMPTSE_NUMERICS_GRAD_CHECK_H_
#define PROMPTSE_NUMERICS_GRAD_CHECK_H_

#include <functional>
#include <string>
#include <vector>

#include "promptse/numerics/tape.h"

namespace promptse {

// Builds a graph from the given leaf variables. The output is reduced by
// summation when it has more than one element.
using GraphBuilder =
    std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Entries whose gradient magnitude is below floor * max|gradient| are
  // compared against that floor instead of their own magnitude.
  double relative_floor = 1e-3;
  // Only inputs flagged here are perturbed (all when empty).
  std::vector<bool> check_input;
  // Passed to Tape::InjectFault on the analytic pass.
  std::string fault_op;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  int worst_input = -1;
  int64_t worst_index = -1;
  std::string message;
};

// Compares tape gradients against central finite differences.
GradCheckReport GradCheck(const GraphBuilder& build,
                          const std::vector<Tensor<double>>& inputs,
                          const GradCheckOptions& options = {});

}  // namespace promptse

#endif  // PROMPTSE_NUMERICS_GRAD_CHECK_H_
