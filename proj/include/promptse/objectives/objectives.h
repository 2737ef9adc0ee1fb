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

// Training losses and evaluation metrics on waveforms. Waveforms are tensors
// of any shape compared element by element; sums accumulate in double.

#ifndef PROMPTSE_OBJECTIVES_OBJECTIVES_H_
#define PROMPTSE_OBJECTIVES_OBJECTIVES_H_

#include <cmath>
#include <functional>
#include <string>

#include "promptse/numerics/tape.h"
#include "promptse/numerics/tensor.h"
#include "promptse/parse.h"

namespace promptse {

enum class LossKind { kSiSdr, kLogMse };

LossKind ParseLossKind(const std::string& name);  // "si_sdr" | "log_mse"
std::string LossKindName(LossKind kind);

struct LossConfig {
  LossKind kind = LossKind::kSiSdr;
  double snr_max_db = 30.0;
  double eps = 1e-8;

  // Silence floor of the log-MSE loss, 10^(-snr_max_db / 10).
  double tau() const { return std::pow(10.0, -snr_max_db / 10.0); }

  void Validate() const;
  // Keys "loss.kind", "loss.snr_max_db", "loss.eps".
  void Set(const std::string& key, const std::string& value);
  KeyValues Items() const;

  bool operator==(const LossConfig&) const = default;
};

// True iff every element is exactly zero.
template <typename T>
bool IsSilent(const Tensor<T>& x);

// 10 log10(|a s|^2 / (|est - a s|^2 + eps |a s|^2)) with a = <est, s> / |s|^2.
// Throws DataError for a silent reference or mismatched sizes.
template <typename T>
double SiSdr(const Tensor<T>& est, const Tensor<T>& ref, double eps = 1e-8);

// Target branch 10 log10(|s - est|^2 + tau |s|^2) when `target` is not
// silent, otherwise 10 log10(|est|^2 + tau |mix_ref|^2). Throws DataError
// when both target and mixture are silent.
template <typename T>
double LogMse(const Tensor<T>& est, const Tensor<T>& target,
              const Tensor<T>& mix_ref, double tau);

// Scale-preserving SNR, 10 log10(|s|^2 / (|s - est|^2 + eps |s|^2)).
template <typename T>
double Snr(const Tensor<T>& est, const Tensor<T>& ref, double eps = 1e-8);

// 10 log10(|mix_ref|^2 / (|est|^2 + eps)). Throws DataError on a silent
// mixture.
template <typename T>
double EnergySuppressionRatio(const Tensor<T>& mix_ref, const Tensor<T>& est,
                              double eps = 1e-8);

template <typename T>
using MetricFn = std::function<double(const Tensor<T>& est, const Tensor<T>& ref)>;

// metric(est, ref) - metric(mix_ref, ref).
template <typename T>
double Improvement(const MetricFn<T>& metric, const Tensor<T>& est,
                   const Tensor<T>& ref, const Tensor<T>& mix_ref);

// Value to minimise: -SiSdr or LogMse, as chosen by `config`. SI-SDR on a
// silent target throws DataError.
template <typename T>
double Loss(const Tensor<T>& est, const Tensor<T>& target,
            const Tensor<T>& mix_ref, const LossConfig& config);

namespace ops {

template <typename T>
Var<T> SiSdr(const Var<T>& est, const Tensor<T>& ref, double eps);

template <typename T>
Var<T> LogMse(const Var<T>& est, const Tensor<T>& target,
              const Tensor<T>& mix_ref, double tau);

template <typename T>
Var<T> Loss(const Var<T>& est, const Tensor<T>& target,
            const Tensor<T>& mix_ref, const LossConfig& config);

}  // namespace ops
}  // namespace promptse

#endif  // PROMPTSE_OBJECTIVES_OBJECTIVES_H_
