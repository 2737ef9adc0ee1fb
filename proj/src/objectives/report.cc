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

#include "promptse/objectives/report.h"

#include "json.hpp"
#include "promptse/error.h"
#include "promptse/io.h"
#include "promptse/objectives/objectives.h"

namespace promptse {
namespace {

using nlohmann::json;

json Optional(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Means of an empty polarity are null.
json SummaryJson(const PolaritySummary& s, bool positive) {
  auto mean = [&](double v) { return s.count > 0 ? json(v) : json(nullptr); };
  json j = {{"count", s.count}, {"esr", mean(s.esr)}};
  if (positive) {
    j["si_sdr"] = mean(s.si_sdr);
    j["si_sdri"] = mean(s.si_sdri);
    j["snr"] = mean(s.snr);
    j["snri"] = mean(s.snri);
  }
  return j;
}

}  // namespace

Polarity ParsePolarity(const std::string& name) {
  if (name == "positive") return Polarity::kPositive;
  if (name == "negative") return Polarity::kNegative;
  throw DataError("unknown polarity '" + name + "'");
}

std::string PolarityName(Polarity polarity) {
  return polarity == Polarity::kPositive ? "positive" : "negative";
}

UtteranceMetrics ScoreUtterance(const std::string& id, const Tensor<float>& est,
                                const Tensor<float>& target,
                                const Tensor<float>& mix_ref, double eps) {
  UtteranceMetrics m;
  m.id = id;
  m.polarity = IsSilent(target) ? Polarity::kNegative : Polarity::kPositive;
  m.esr = EnergySuppressionRatio(mix_ref, est, eps);
  if (m.polarity == Polarity::kPositive) {
    const MetricFn<float> si = [eps](const Tensor<float>& e, const Tensor<float>& r) {
      return SiSdr(e, r, eps);
    };
    const MetricFn<float> snr = [eps](const Tensor<float>& e, const Tensor<float>& r) {
      return Snr(e, r, eps);
    };
    m.si_sdr = si(est, target);
    m.si_sdri = *m.si_sdr - si(mix_ref, target);
    m.snr = snr(est, target);
    m.snri = *m.snr - snr(mix_ref, target);
  }
  return m;
}

MetricSummary Summarize(const std::vector<UtteranceMetrics>& metrics) {
  MetricSummary s;
  for (const auto& m : metrics) {
    PolaritySummary& p = m.polarity == Polarity::kPositive ? s.positive : s.negative;
    ++p.count;
    p.esr += m.esr;
    if (m.si_sdr) p.si_sdr += *m.si_sdr;
    if (m.si_sdri) p.si_sdri += *m.si_sdri;
    if (m.snr) p.snr += *m.snr;
    if (m.snri) p.snri += *m.snri;
  }
  for (PolaritySummary* p : {&s.positive, &s.negative}) {
    if (p->count == 0) continue;
    const double n = double(p->count);
    p->esr /= n;
    p->si_sdr /= n;
    p->si_sdri /= n;
    p->snr /= n;
    p->snri /= n;
  }
  return s;
}

std::string FormatMetricReport(const std::vector<UtteranceMetrics>& metrics) {
  std::string out;
  for (const auto& m : metrics) {
    json j = {{"id", m.id},
              {"polarity", PolarityName(m.polarity)},
              {"si_sdr", Optional(m.si_sdr)},
              {"si_sdri", Optional(m.si_sdri)},
              {"snr", Optional(m.snr)},
              {"snri", Optional(m.snri)},
              {"esr", m.esr}};
    out += j.dump() + "\n";
  }
  const MetricSummary s = Summarize(metrics);
  json summary = {{"summary",
                   {{"positive", SummaryJson(s.positive, true)},
                    {"negative", SummaryJson(s.negative, false)}}}};
  out += summary.dump() + "\n";
  return out;
}

void WriteMetricReport(const std::string& path,
                       const std::vector<UtteranceMetrics>& metrics) {
  WriteFileAtomic(path, FormatMetricReport(metrics));
}

}  // namespace promptse
