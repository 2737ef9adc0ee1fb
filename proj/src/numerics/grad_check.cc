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

#include "promptse/numerics/grad_check.h"

#include <algorithm>
#include <cmath>

#include "promptse/numerics/ops.h"

namespace promptse {
namespace {

double Evaluate(const GraphBuilder& build,
                const std::vector<Tensor<double>>& inputs) {
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(tape.Constant(t));
  Var<double> out = build(tape, leaves);
  if (out.value().size() != 1) out = ops::Sum(out);
  return out.value()[0];
}

}  // namespace

GradCheckReport GradCheck(const GraphBuilder& build,
                          const std::vector<Tensor<double>>& inputs,
                          const GradCheckOptions& options) {
  GradCheckReport report;
  auto checked = [&](size_t i) {
    return options.check_input.empty() || options.check_input.at(i);
  };

  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    if (!options.fault_op.empty()) tape.InjectFault(options.fault_op);
    std::vector<Var<double>> leaves;
    for (size_t i = 0; i < inputs.size(); ++i) {
      leaves.push_back(checked(i) ? tape.Variable(inputs[i])
                                  : tape.Constant(inputs[i]));
    }
    Var<double> out = build(tape, leaves);
    if (out.value().size() != 1) out = ops::Sum(out);
    if (!std::isfinite(out.value()[0])) {
      report.message = "non-finite forward output";
      return report;
    }
    tape.Backward(out);
    for (const auto& leaf : leaves) analytic.push_back(tape.Grad(leaf));
  }

  std::vector<Tensor<double>> numeric;
  double scale = 0.0;
  std::vector<Tensor<double>> work = inputs;
  for (size_t i = 0; i < inputs.size(); ++i) {
    numeric.emplace_back(inputs[i].shape());
    if (!checked(i)) continue;
    for (int64_t k = 0; k < inputs[i].size(); ++k) {
      const double x0 = inputs[i][k];
      work[i][k] = x0 + options.step;
      const double fp = Evaluate(build, work);
      work[i][k] = x0 - options.step;
      const double fm = Evaluate(build, work);
      work[i][k] = x0;
      const double d = (fp - fm) / (2.0 * options.step);
      if (!std::isfinite(d) || !std::isfinite(analytic[i][k])) {
        report.worst_input = static_cast<int>(i);
        report.worst_index = k;
        report.max_rel_err = INFINITY;
        report.message = "non-finite gradient at input " + std::to_string(i) +
                         " element " + std::to_string(k);
        return report;
      }
      numeric[i][k] = d;
      scale = std::max({scale, std::abs(d), std::abs(analytic[i][k])});
    }
  }

  const double floor = std::max(options.relative_floor * scale, 1e-12);
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (!checked(i)) continue;
    for (int64_t k = 0; k < inputs[i].size(); ++k) {
      const double a = analytic[i][k], n = numeric[i][k];
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      const double err = std::abs(a - n) / denom;
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_input = static_cast<int>(i);
        report.worst_index = k;
      }
    }
  }
  report.pass = report.max_rel_err < options.tolerance;
  if (!report.pass) {
    report.message = "max relative error " + std::to_string(report.max_rel_err) +
                     " at input " + std::to_string(report.worst_input) +
                     " element " + std::to_string(report.worst_index);
  }
  return report;
}

}  // namespace promptse
