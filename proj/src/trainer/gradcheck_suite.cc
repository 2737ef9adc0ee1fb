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

#include "promptse/trainer/gradcheck_suite.h"

#include <map>

#include "fmt/format.h"
#include "promptse/error.h"
#include "promptse/model/network.h"
#include "promptse/model/params.h"
#include "promptse/numerics/grad_check.h"
#include "promptse/numerics/random.h"

namespace promptse {

ModelConfig TinyGradcheckModel() {
  ModelConfig c;
  c.channels = 2;
  c.embed_dim = 4;
  c.blocks = 2;
  c.enroll_blocks = 1;
  c.downsample_depth = 1;
  c.fusion = FusionKind::kFilm;
  c.speaker_dim = 6;
  c.hidden = 3;
  c.embedder_hidden = 5;
  return c;
}

StftConfig TinyGradcheckStft() { return StftConfig::ForSampleRate(1000); }

std::string GradcheckSuiteReport::Format() const {
  std::string out;
  for (const auto& g : groups) {
    out += fmt::format("{:<40} max_rel_err={:.3e} {}\n", g.name, g.max_rel_err,
                       g.pass ? "ok" : "FAIL");
  }
  out += pass ? "gradcheck suite: PASS\n" : "gradcheck suite: FAIL\n";
  return out;
}

GradcheckSuiteReport RunGradcheckSuite(const ModelConfig& model, const StftConfig& stft,
                                       const GradcheckSuiteOptions& options) {
  model.Validate();
  stft.Validate();
  if (model.embed_dim > 4 || model.blocks != 2 || options.mix_frames < 1 ||
      options.mix_frames > 8 || stft.bins() > 9) {
    throw ConfigError(fmt::format(
        "gradcheck suite needs a tiny config (D <= 4, B = 2, 1..8 mixture frames, <= 9 bins); "
        "got D={}, B={}, {} frames, {} bins",
        model.embed_dim, model.blocks, options.mix_frames, stft.bins()));
  }
  const ParamMap params = InitParams(model, stft, options.seed);
  const int64_t n = options.mix_frames * stft.hop_length;
  Rng rng(Rng::Mix(options.seed, 0x6763));
  Tensor<double> mixture({model.channels, n});
  Tensor<double> target({n});
  Tensor<double> enrollment({options.enroll_samples});
  for (double& v : mixture.values()) v = 0.3 * rng.Normal();
  for (double& v : target.values()) v = 0.2 * rng.Normal();
  for (double& v : enrollment.values()) v = 0.3 * rng.Normal();
  Tensor<double> mix_ref({n});
  std::copy(mixture.data() + model.ref_channel * n,
            mixture.data() + (model.ref_channel + 1) * n, mix_ref.data());
  LossConfig loss;
  loss.kind = options.loss;

  std::map<std::string, Tensor<double>> base;
  for (const auto& [name, t] : params) base.emplace(name, t.Cast<double>());

  GradCheckOptions gc;
  gc.tolerance = options.tolerance;
  gc.fault_op = options.fault_op;

  GradcheckSuiteReport report;
  report.pass = true;
  for (const auto& [name, value] : base) {
    const GradCheckReport r = GradCheck(
        [&](Tape<double>& tape, const std::vector<Var<double>>& in) {
          std::map<std::string, Var<double>> vars;
          for (const auto& [other, t] : base) {
            vars[other] = other == name ? in[0] : tape.Constant(t);
          }
          const BoundParams<double> p(tape, std::move(vars));
          const auto out = model::Extract(p, model, stft, mixture, enrollment);
          return ops::Loss(out.waveform, target, mix_ref, loss);
        },
        {value}, gc);
    report.groups.push_back({name, r.max_rel_err, r.pass});
    report.pass = report.pass && r.pass;
  }
  return report;
}

}  // namespace promptse
