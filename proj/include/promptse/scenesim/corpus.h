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

// Corpus layout on disk:
//
//   <dir>/train.jsonl, val.jsonl, test.jsonl   one manifest record per line
//   <dir>/<split>/<id>_mix.wav                 [C, N] mixture
//   <dir>/<split>/<id>_target.wav              direct-path target
//   <dir>/<split>/<id>_enroll.wav              enrollment utterance
//
// WAVs are 32-bit float so silent targets stay bit-exact. Manifest paths are
// relative to the manifest's directory unless absolute.

#ifndef PROMPTSE_SCENESIM_CORPUS_H_
#define PROMPTSE_SCENESIM_CORPUS_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "promptse/scenesim/scene.h"

namespace promptse {

struct ManifestRecord {
  std::string id;
  Polarity polarity = Polarity::kPositive;
  std::string mixture_path;
  std::string target_path;
  std::string enrollment_path;
  int64_t speaker_id = 0;
  uint64_t seed = 0;
  double snr_db = 0;
};

std::string FormatManifestRecord(const ManifestRecord& record);
// Throws DataError naming the line on malformed input.
std::vector<ManifestRecord> ReadManifest(const std::string& path);
void WriteManifest(const std::string& path, const std::vector<ManifestRecord>& records);

// Reads the three WAVs of a record, resolving relative paths against
// `base_dir`. Throws DataError on a sample-rate mismatch or a target whose
// silence disagrees with the record's polarity.
TrainingPair LoadPair(const ManifestRecord& record, const std::string& base_dir,
                      int sample_rate);

inline constexpr std::array<const char*, 3> kSplitNames = {"train", "val", "test"};

struct CorpusConfig {
  int64_t n_train = 200;
  int64_t n_val = 40;
  int64_t n_test = 40;
  double neg_fraction = 0.0;
  // Speakers per split; ids are consecutive and disjoint across splits.
  int64_t train_speakers = 40;
  int64_t val_speakers = 10;
  int64_t test_speakers = 10;

  void Validate() const;
  // Keys "corpus.*".
  void Set(const std::string& key, const std::string& value);
  KeyValues Items() const;

  int64_t pairs(int split) const;
  std::vector<int64_t> SpeakerPool(int split) const;
  // Seed of pair `index` in `split`.
  static uint64_t PairSeed(uint64_t master_seed, int split, int64_t index);

  bool operator==(const CorpusConfig&) const = default;
};

// Writes the corpus under `out_dir`. Refuses (ConfigError) to touch an
// existing non-empty directory unless `overwrite`. The corpus is staged in a
// sibling directory and renamed into place once complete.
void BuildCorpus(const CorpusConfig& corpus, const SceneConfig& scene,
                 int64_t hop_length, const std::string& out_dir,
                 uint64_t master_seed, bool overwrite);

}  // namespace promptse

#endif  // PROMPTSE_SCENESIM_CORPUS_H_
