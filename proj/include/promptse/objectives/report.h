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

#ifndef PROMPTSE_OBJECTIVES_REPORT_H_
#define PROMPTSE_OBJECTIVES_REPORT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "promptse/numerics/tensor.h"

namespace promptse {

enum class Polarity { kPositive, kNegative };

Polarity ParsePolarity(const std::string& name);  // "positive" | "negative"
std::string PolarityName(Polarity polarity);

// Per-utterance scores in dB. Target-referenced metrics are absent for
// negative pairs, whose target is silent. "snr" is a plain SNR, not the
// projection-based BSS-eval SDR.
struct UtteranceMetrics {
  std::string id;
  Polarity polarity = Polarity::kPositive;
  std::optional<double> si_sdr, si_sdri, snr, snri;
  double esr = 0;
};

UtteranceMetrics ScoreUtterance(const std::string& id, const Tensor<float>& est,
                                const Tensor<float>& target,
                                const Tensor<float>& mix_ref, double eps = 1e-8);

// Unweighted means over utterances of one polarity.
struct PolaritySummary {
  int64_t count = 0;
  double si_sdr = 0, si_sdri = 0, snr = 0, snri = 0, esr = 0;
};

struct MetricSummary {
  PolaritySummary positive, negative;
};

MetricSummary Summarize(const std::vector<UtteranceMetrics>& metrics);

// One JSON object per line per utterance, then a summary line
// {"summary": {...}}.
std::string FormatMetricReport(const std::vector<UtteranceMetrics>& metrics);
void WriteMetricReport(const std::string& path,
                       const std::vector<UtteranceMetrics>& metrics);

}  // namespace promptse

#endif  // PROMPTSE_OBJECTIVES_REPORT_H_
