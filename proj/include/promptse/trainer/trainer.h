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

// Supervised training of the extraction network.
//
// Each epoch visits every positive training pair once, plus negatives drawn
// so that they make up `neg_fraction` of the epoch, in an order shuffled
// from (seed, epoch). The loss of a batch is the mean per-pair loss. After
// an initial validation pass and after every epoch the model is scored on
// the validation pairs; the best positive-pair SI-SDRi selects the kept
// parameters and stagnation halves the learning rate.
//
// Files written under the output directory, when one is given:
//   last.ckpt         parameters, Adam moments, best parameters and
//                     loop state; enough to resume bit-exactly
//   best.ckpt         parameters with the best validation score
//   train_log.jsonl   {epoch, step, lr, loss, val_si_sdri, val_esr} records

#ifndef PROMPTSE_TRAINER_TRAINER_H_
#define PROMPTSE_TRAINER_TRAINER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "promptse/dsp/stft.h"
#include "promptse/model/config.h"
#include "promptse/model/params.h"
#include "promptse/objectives/report.h"
#include "promptse/scenesim/scene.h"
#include "promptse/trainer/adam.h"
#include "promptse/trainer/config.h"

namespace promptse {

// Everything needed to run inference.
struct ModelBundle {
  ModelConfig model;
  StftConfig stft;
  ParamMap params;
};

// Writes a parameter checkpoint whose header holds the model and STFT
// configuration plus `extra_header`.
void SaveModel(const std::string& path, const ModelBundle& bundle,
               const KeyValues& extra_header = {});
// Reads the model part of any checkpoint (training state is ignored).
// Throws DataError on unreadable files, bad headers or invalid parameters.
ModelBundle LoadModel(const std::string& path);

// All pairs of a manifest, with paths resolved against its directory.
std::vector<TrainingPair> LoadSplit(const std::string& manifest_path, int sample_rate);

// Scores every pair. With `oracle` the target itself is scored as the
// estimate, which checks the metric path.
std::vector<UtteranceMetrics> Evaluate(const ModelBundle& bundle,
                                       const std::vector<TrainingPair>& pairs,
                                       bool oracle = false);

struct ValidationResult {
  std::optional<double> si_sdri;  // mean over positives
  std::optional<double> esr;      // mean over negatives
  int64_t positives = 0;
  int64_t negatives = 0;
};

ValidationResult Validate(const ModelBundle& bundle, const std::vector<TrainingPair>& pairs);

// Loss of one pair and its gradient with respect to every parameter.
struct PairGradient {
  double loss = 0;
  ParamMap grads;
};
PairGradient ComputePairGradient(const ModelBundle& bundle, const TrainingPair& pair,
                                 const LossConfig& loss);

struct TrainState {
  ParamMap params;
  AdamState adam;
  ParamMap best_params;
  double lr = 0;
  int64_t epoch = 0;          // completed epochs
  int64_t step_in_epoch = 0;  // batches already run in the next epoch
  int64_t global_step = 0;    // batches run, including skipped ones
  bool validated = false;     // initial validation done
  std::optional<double> best_val;
  int64_t stagnant = 0;
  int64_t nonfinite_streak = 0;
};

// Fresh state: parameters initialised from train.seed.
TrainState InitTrainState(const ModelConfig& model, const StftConfig& stft,
                          const TrainConfig& train);

void SaveTrainState(const std::string& path, const ModelConfig& model,
                    const StftConfig& stft, const TrainConfig& train,
                    const TrainState& state);

struct LoadedTrainState {
  ModelConfig model;
  StftConfig stft;
  TrainConfig train;
  TrainState state;
};
LoadedTrainState LoadTrainState(const std::string& path);

struct TrainLogRecord {
  int64_t epoch = 0;
  int64_t step = 0;
  double lr = 0;
  std::optional<double> loss;
  std::optional<double> val_si_sdri;
  std::optional<double> val_esr;
};
std::string FormatTrainLogRecord(const TrainLogRecord& record);

struct TrainOptions {
  // Empty disables all file output.
  std::string out_dir;
  // Called for every log record as it is produced.
  std::function<void(const TrainLogRecord&)> on_log;
};

struct TrainResult {
  TrainState state;
  std::vector<TrainLogRecord> log;
  std::vector<double> step_losses;  // one per batch run in this call
};

// Runs until train.max_epochs epochs are complete or train.max_steps batches
// have run in total. Throws ConfigError on invalid configs or an empty
// training set, DataError when the validation set has no positive pair,
// and NumericalError after too many consecutive non-finite steps.
TrainResult Train(const ModelConfig& model, const StftConfig& stft,
                  const TrainConfig& train, const std::vector<TrainingPair>& train_pairs,
                  const std::vector<TrainingPair>& val_pairs, TrainState state,
                  const TrainOptions& options = {});

// Indices of the training pairs visited in `epoch` (1-based), in order.
std::vector<int64_t> EpochOrder(const std::vector<TrainingPair>& pairs,
                                const TrainConfig& train, int64_t epoch);

}  // namespace promptse

#endif  // PROMPTSE_TRAINER_TRAINER_H_
