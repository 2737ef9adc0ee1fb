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

// Merged configuration of one command-line run.
//
// A config file holds flat `key=value` lines; flags and `--set key=value`
// overrides are applied on top in order. Keys are grouped by prefix:
//
//   model.*   architecture            stft.*    framing
//   train.*   optimization            loss.*    objective
//   scene.*   scene simulation        corpus.*  corpus sizes
//   synth.seed                        corpus master seed
//
// Unknown keys are ConfigErrors.

#ifndef PROMPTSE_CLI_RUN_CONFIG_H_
#define PROMPTSE_CLI_RUN_CONFIG_H_

#include <cstdint>
#include <string>
#include <utility>

#include "promptse/dsp/stft.h"
#include "promptse/model/config.h"
#include "promptse/parse.h"
#include "promptse/scenesim/corpus.h"
#include "promptse/scenesim/scene.h"
#include "promptse/trainer/config.h"

namespace promptse {

struct RunConfig {
  ModelConfig model;
  StftConfig stft;
  TrainConfig train;
  SceneConfig scene;
  CorpusConfig corpus;
  uint64_t synth_seed = 0;

  void Set(const std::string& key, const std::string& value);
  void SetAll(const KeyValues& values);
  KeyValues Items() const;

  // Derives the STFT from scene.sample_rate unless a stft.* key was set,
  // then validates every part and their agreement (sample rates, channel
  // count versus microphones, durations versus hop).
  void Finalize();
  // The STFT step of Finalize alone.
  void ResolveStft();

 private:
  bool stft_set_ = false;
};

// Reads a config file. Unreadable files and bad keys are ConfigErrors.
KeyValues ReadConfigFile(const std::string& path);

// Splits "key=value" (ConfigError without '=').
std::pair<std::string, std::string> SplitAssignment(const std::string& text);

}  // namespace promptse

#endif  // PROMPTSE_CLI_RUN_CONFIG_H_
