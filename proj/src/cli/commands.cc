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

#include "promptse/cli/commands.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "fmt/format.h"
#include "promptse/cli/run_config.h"
#include "promptse/dsp/wav.h"
#include "promptse/error.h"
#include "promptse/model/flops.h"
#include "promptse/model/network.h"
#include "promptse/objectives/report.h"
#include "promptse/scenesim/corpus.h"
#include "promptse/trainer/gradcheck_suite.h"
#include "promptse/trainer/trainer.h"

namespace promptse {
namespace {

namespace fs = std::filesystem;

constexpr const char* kTrainOutputs[] = {"last.ckpt", "best.ckpt", "train_log.jsonl"};

RunConfig BuildConfig(const Settings& settings) {
  RunConfig config;
  for (const auto& [key, value] : settings) config.Set(key, value);
  return config;
}

bool NonEmptyDir(const std::string& path) {
  std::error_code ec;
  return fs::exists(path, ec) && (!fs::is_directory(path, ec) || !fs::is_empty(path, ec));
}

std::string ManifestPath(const std::string& corpus_dir, const char* split) {
  const std::string path = (fs::path(corpus_dir) / (std::string(split) + ".jsonl")).string();
  if (!fs::is_regular_file(path)) throw DataError("missing manifest: " + path);
  return path;
}

std::string Db(const std::optional<double>& v) {
  return v ? fmt::format("{:.2f} dB", *v) : std::string("absent");
}

// Applies resume-time settings to the checkpoint's configuration. Only the
// run length may change; other keys must restate the stored value.
TrainConfig ResumeConfig(const LoadedTrainState& loaded, const Settings& settings) {
  TrainConfig train = loaded.train;
  RunConfig stored;
  stored.model = loaded.model;
  stored.stft = loaded.stft;
  stored.train = loaded.train;
  for (const auto& [key, value] : settings) {
    if (key == "train.max_epochs" || key == "train.max_steps") {
      train.Set(key, value);
      continue;
    }
    RunConfig probe = stored;
    probe.Set(key, value);
    const bool relevant = key.rfind("model.", 0) == 0 || key.rfind("stft.", 0) == 0 ||
                          key.rfind("train.", 0) == 0 || key.rfind("loss.", 0) == 0;
    if (relevant && probe.Items() != stored.Items()) {
      throw ConfigError(fmt::format(
          "{}={} differs from the checkpoint being resumed; only train.max_epochs and "
          "train.max_steps may change",
          key, value));
    }
  }
  train.Validate();
  return train;
}

}  // namespace

int ExitCodeFor(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitData;
  return kExitInternal;
}

void CmdSynth(const SynthArgs& args, std::ostream& out) {
  RunConfig config = BuildConfig(args.settings);
  config.Finalize();
  if (args.out_dir.empty()) throw ConfigError("synth needs an output directory");
  BuildCorpus(config.corpus, config.scene, config.stft.hop_length, args.out_dir,
              config.synth_seed, args.overwrite);
  for (int split = 0; split < static_cast<int>(kSplitNames.size()); ++split) {
    const int64_t n = config.corpus.pairs(split);
    const std::vector<bool> neg = NegativeMask(n, config.corpus.neg_fraction);
    out << fmt::format("{}: {} pairs ({} negative)\n", kSplitNames[split], n,
                       std::count(neg.begin(), neg.end(), true));
  }
  out << "corpus written to " << args.out_dir << "\n";
}

void CmdTrain(const TrainArgs& args, std::ostream& out) {
  if (args.out_dir.empty()) throw ConfigError("train needs an output directory");
  if (args.resume && args.overwrite) throw ConfigError("--resume and --overwrite exclude each other");

  ModelConfig model;
  StftConfig stft;
  TrainConfig train;
  TrainState state;
  const std::string last = (fs::path(args.out_dir) / "last.ckpt").string();
  if (args.resume) {
    if (!fs::is_regular_file(last)) throw DataError("nothing to resume: missing " + last);
    LoadedTrainState loaded = LoadTrainState(last);
    train = ResumeConfig(loaded, args.settings);
    model = loaded.model;
    stft = loaded.stft;
    state = std::move(loaded.state);
  } else {
    RunConfig config = BuildConfig(args.settings);
    config.Finalize();
    model = config.model;
    stft = config.stft;
    train = config.train;
    if (NonEmptyDir(args.out_dir) && !args.overwrite) {
      throw ConfigError(args.out_dir + " is not empty; pass --overwrite or --resume");
    }
  }

  const std::vector<TrainingPair> train_pairs =
      LoadSplit(ManifestPath(args.corpus_dir, "train"), stft.sample_rate);
  const std::vector<TrainingPair> val_pairs =
      LoadSplit(ManifestPath(args.corpus_dir, "val"), stft.sample_rate);

  if (!args.resume) {
    state = InitTrainState(model, stft, train);
    if (args.overwrite) {
      for (const char* name : kTrainOutputs) fs::remove(fs::path(args.out_dir) / name);
    }
  }

  TrainOptions options;
  options.out_dir = args.out_dir;
  options.on_log = [&](const TrainLogRecord& r) { out << FormatTrainLogRecord(r) << "\n"; };
  const TrainResult result = Train(model, stft, train, train_pairs, val_pairs,
                                   std::move(state), options);
  out << fmt::format("finished at epoch {}, step {}; best validation SI-SDRi {}\n",
                     result.state.epoch, result.state.global_step, Db(result.state.best_val));
}

void CmdEval(const EvalArgs& args, std::ostream& out) {
  if (args.report.empty()) throw ConfigError("eval needs a report path");
  const ModelBundle bundle = LoadModel(args.checkpoint);
  const std::vector<TrainingPair> pairs = LoadSplit(args.manifest, bundle.stft.sample_rate);
  const std::vector<UtteranceMetrics> metrics = Evaluate(bundle, pairs, args.oracle);
  WriteMetricReport(args.report, metrics);
  const MetricSummary s = Summarize(metrics);
  if (s.positive.count > 0) {
    out << fmt::format("positives: {}  SI-SDR {:.2f} dB  SI-SDRi {:.2f} dB  SNRi {:.2f} dB\n",
                       s.positive.count, s.positive.si_sdr, s.positive.si_sdri,
                       s.positive.snri);
  } else {
    out << "positives: 0  SI-SDRi absent\n";
  }
  if (s.negative.count > 0) {
    out << fmt::format("negatives: {}  ESR {:.2f} dB\n", s.negative.count, s.negative.esr);
  } else {
    out << "negatives: 0  ESR absent\n";
  }
  out << "report written to " << args.report << "\n";
}

void CmdExtract(const ExtractArgs& args, std::ostream& out) {
  if (args.out.empty()) throw ConfigError("extract needs an output path");
  const ModelBundle bundle = LoadModel(args.checkpoint);
  const int rate = bundle.stft.sample_rate;
  const Waveform mixture = ReadWav(args.mixture);
  const Waveform enrollment = ReadWav(args.enrollment);
  for (const auto* w : {&mixture, &enrollment}) {
    if (w->sample_rate != rate) {
      throw DataError(fmt::format("{} is sampled at {} Hz but the model expects {} Hz",
                                  w == &mixture ? args.mixture : args.enrollment,
                                  w->sample_rate, rate));
    }
  }
  if (mixture.channels() != bundle.model.channels) {
    throw DataError(fmt::format("{} has {} channels; the model expects C={}", args.mixture,
                                mixture.channels(), bundle.model.channels));
  }
  if (enrollment.channels() != 1) {
    throw DataError(fmt::format("{} has {} channels; the enrollment must be mono",
                                args.enrollment, enrollment.channels()));
  }
  Tensor<float> enroll({enrollment.length()});
  std::copy(enrollment.samples.data(), enrollment.samples.data() + enrollment.length(),
            enroll.data());
  const Tensor<float> est = model::ExtractWaveform(bundle.params, bundle.model, bundle.stft,
                                                   mixture.samples, enroll);
  Waveform result;
  result.sample_rate = rate;
  result.samples = Tensor<float>({1, est.size()});
  std::copy(est.data(), est.data() + est.size(), result.samples.data());
  WriteWav(args.out, result);
  out << fmt::format("wrote {} samples to {}\n", est.size(), args.out);
}

void CmdFlops(const FlopsArgs& args, std::ostream& out) {
  RunConfig config;
  if (args.preset == "v1") {
    config.model = ModelConfig::V1();
  } else if (args.preset == "v2") {
    config.model = ModelConfig::V2();
  } else if (args.preset != "desk") {
    throw ConfigError("unknown preset '" + args.preset + "' (desk, v1, v2)");
  }
  for (const auto& [key, value] : args.settings) config.Set(key, value);
  config.ResolveStft();
  config.model.Validate();
  config.stft.Validate();
  if (!(args.mix_seconds > 0) || !(args.enroll_seconds > 0)) {
    throw ConfigError("durations must be positive");
  }

  std::vector<int64_t> depths = {0};
  if (config.model.downsample_depth > 0) depths.push_back(config.model.downsample_depth);
  out << fmt::format("{:>3} {:>3} {:>14} {:>12} {:>10}\n", "L", "G", "enroll_frames",
                     "GMAC", "GMAC/s");
  for (int64_t g : depths) {
    for (int64_t l = 1; l <= config.model.blocks; ++l) {
      ModelConfig m = config.model;
      m.downsample_depth = g;
      m.enroll_blocks = l;
      const FlopBreakdown f =
          EstimateFlops(m, config.stft, args.mix_seconds, args.enroll_seconds);
      out << fmt::format("{:>3} {:>3} {:>14} {:>12.4f} {:>10.4f}\n", l, g,
                         f.enroll_frames_downsampled, f.total * 1e-9, f.per_second * 1e-9);
    }
  }
}

void CmdGradcheck(const GradcheckArgs& args, std::ostream& out) {
  std::vector<std::string> failed;
  for (LossKind loss : args.losses) {
    GradcheckSuiteOptions options;
    options.loss = loss;
    options.seed = args.seed;
    options.tolerance = args.tolerance;
    options.fault_op = args.fault_op;
    const GradcheckSuiteReport report =
        RunGradcheckSuite(TinyGradcheckModel(), TinyGradcheckStft(), options);
    out << "loss " << LossKindName(loss) << "\n" << report.Format();
    for (const auto& g : report.groups) {
      if (!g.pass) {
        failed.push_back(fmt::format("{} ({}, rel. err {:.3e})", g.name, LossKindName(loss),
                                     g.max_rel_err));
      }
    }
  }
  if (!failed.empty()) {
    constexpr size_t kShown = 5;
    std::string list;
    for (size_t i = 0; i < std::min(failed.size(), kShown); ++i) {
      list += (list.empty() ? "" : ", ") + failed[i];
    }
    if (failed.size() > kShown) list += fmt::format(" and {} more", failed.size() - kShown);
    throw NumericalError(fmt::format("gradient check failed for {} group(s): {}",
                                     failed.size(), list));
  }
}

void CmdConfig(const Settings& settings, std::ostream& out) {
  RunConfig config = BuildConfig(settings);
  config.Finalize();
  out << FormatKeyValueText(config.Items());
}

}  // namespace promptse
