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

#include "promptse/scenesim/corpus.h"

#include <filesystem>
#include <sstream>

#include "fmt/format.h"
#include "json.hpp"
#include "promptse/dsp/wav.h"
#include "promptse/error.h"
#include "promptse/io.h"
#include "promptse/numerics/random.h"
#include "promptse/objectives/objectives.h"

namespace promptse {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

Tensor<float> Mono(const Waveform& w, const std::string& path) {
  if (w.channels() != 1) {
    throw DataError(fmt::format("{}: expected 1 channel, found {}", path, w.channels()));
  }
  return w.samples.Reshaped({w.length()});
}

std::string Resolve(const std::string& path, const std::string& base) {
  const fs::path p(path);
  return p.is_absolute() ? path : (fs::path(base) / p).string();
}

bool NonEmptyDirectory(const fs::path& p) {
  std::error_code ec;
  return fs::exists(p, ec) && (!fs::is_directory(p, ec) || !fs::is_empty(p, ec));
}

}  // namespace

std::string FormatManifestRecord(const ManifestRecord& r) {
  json j = {{"id", r.id},
            {"polarity", PolarityName(r.polarity)},
            {"mixture_path", r.mixture_path},
            {"target_path", r.target_path},
            {"enrollment_path", r.enrollment_path},
            {"speaker_id", r.speaker_id},
            {"seed", r.seed},
            {"snr_db", r.snr_db}};
  return j.dump();
}

std::vector<ManifestRecord> ReadManifest(const std::string& path) {
  std::istringstream in(ReadFile(path));
  std::vector<ManifestRecord> out;
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ManifestRecord r;
      r.id = j.at("id").get<std::string>();
      r.polarity = ParsePolarity(j.at("polarity").get<std::string>());
      r.mixture_path = j.at("mixture_path").get<std::string>();
      r.target_path = j.at("target_path").get<std::string>();
      r.enrollment_path = j.at("enrollment_path").get<std::string>();
      r.speaker_id = j.at("speaker_id").get<int64_t>();
      r.seed = j.at("seed").get<uint64_t>();
      r.snr_db = j.at("snr_db").get<double>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{}:{}: malformed manifest record: {}", path, number, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path, number, e.what()));
    }
  }
  return out;
}

void WriteManifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::string text;
  for (const auto& r : records) text += FormatManifestRecord(r) + "\n";
  WriteFileAtomic(path, text);
}

TrainingPair LoadPair(const ManifestRecord& record, const std::string& base_dir,
                      int sample_rate) {
  TrainingPair p;
  p.id = record.id;
  p.polarity = record.polarity;
  p.speaker_id = record.speaker_id;
  p.seed = record.seed;
  p.snr_db = record.snr_db;
  const std::string mix = Resolve(record.mixture_path, base_dir);
  const std::string target = Resolve(record.target_path, base_dir);
  const std::string enroll = Resolve(record.enrollment_path, base_dir);
  p.mixture = ReadWav(mix, sample_rate).samples;
  p.target = Mono(ReadWav(target, sample_rate), target);
  p.enrollment = Mono(ReadWav(enroll, sample_rate), enroll);
  if (p.target.size() != p.mixture.dim(1)) {
    throw DataError(fmt::format("{}: target has {} samples, mixture {}", record.id,
                                p.target.size(), p.mixture.dim(1)));
  }
  if (IsSilent(p.target) != (p.polarity == Polarity::kNegative)) {
    throw DataError(fmt::format("{}: target silence disagrees with polarity {}", record.id,
                                PolarityName(p.polarity)));
  }
  return p;
}

void CorpusConfig::Validate() const {
  if (n_train < 0 || n_val < 0 || n_test < 0) throw ConfigError("corpus sizes must be non-negative");
  if (!(neg_fraction >= 0 && neg_fraction < 1)) {
    throw ConfigError("corpus.neg_fraction must lie in [0, 1)");
  }
  if (train_speakers < 1 || val_speakers < 1 || test_speakers < 1) {
    throw ConfigError("every split needs at least one speaker");
  }
}

void CorpusConfig::Set(const std::string& key, const std::string& value) {
  if (key == "corpus.n_train") {
    n_train = ParseInt(key, value);
  } else if (key == "corpus.n_val") {
    n_val = ParseInt(key, value);
  } else if (key == "corpus.n_test") {
    n_test = ParseInt(key, value);
  } else if (key == "corpus.neg_fraction") {
    neg_fraction = ParseDouble(key, value);
  } else if (key == "corpus.train_speakers") {
    train_speakers = ParseInt(key, value);
  } else if (key == "corpus.val_speakers") {
    val_speakers = ParseInt(key, value);
  } else if (key == "corpus.test_speakers") {
    test_speakers = ParseInt(key, value);
  } else {
    throw ConfigError("unknown key " + key);
  }
}

KeyValues CorpusConfig::Items() const {
  return {{"corpus.n_train", std::to_string(n_train)},
          {"corpus.n_val", std::to_string(n_val)},
          {"corpus.n_test", std::to_string(n_test)},
          {"corpus.neg_fraction", FormatDouble(neg_fraction)},
          {"corpus.train_speakers", std::to_string(train_speakers)},
          {"corpus.val_speakers", std::to_string(val_speakers)},
          {"corpus.test_speakers", std::to_string(test_speakers)}};
}

int64_t CorpusConfig::pairs(int split) const {
  const int64_t n[3] = {n_train, n_val, n_test};
  return n[split];
}

std::vector<int64_t> CorpusConfig::SpeakerPool(int split) const {
  const int64_t count[3] = {train_speakers, val_speakers, test_speakers};
  int64_t first = 0;
  for (int s = 0; s < split; ++s) first += count[s];
  std::vector<int64_t> ids(count[split]);
  for (int64_t i = 0; i < count[split]; ++i) ids[i] = first + i;
  return ids;
}

uint64_t CorpusConfig::PairSeed(uint64_t master_seed, int split, int64_t index) {
  return Rng::Mix(Rng::Mix(master_seed, static_cast<uint64_t>(split)),
                  static_cast<uint64_t>(index));
}

void BuildCorpus(const CorpusConfig& corpus, const SceneConfig& scene,
                 int64_t hop_length, const std::string& out_dir,
                 uint64_t master_seed, bool overwrite) {
  corpus.Validate();
  scene.Validate(hop_length);
  for (int split = 0; split < 3; ++split) {
    if (corpus.pairs(split) > 0 &&
        static_cast<int64_t>(corpus.SpeakerPool(split).size()) <= scene.n_sources) {
      throw ConfigError(fmt::format("split {} needs more than {} speakers",
                                    kSplitNames[split], scene.n_sources));
    }
  }
  const fs::path target(out_dir);
  if (NonEmptyDirectory(target) && !overwrite) {
    throw ConfigError(out_dir + " exists and is not empty; pass the overwrite flag to replace it");
  }
  const fs::path staging = target.string() + ".partial";
  std::error_code ec;
  fs::remove_all(staging, ec);
  fs::create_directories(staging, ec);
  if (ec) throw DataError("cannot create " + staging.string() + ": " + ec.message());

  for (int split = 0; split < 3; ++split) {
    const std::string name = kSplitNames[split];
    const int64_t n = corpus.pairs(split);
    fs::create_directories(staging / name, ec);
    if (ec) throw DataError("cannot create " + (staging / name).string() + ": " + ec.message());
    const std::vector<int64_t> pool = corpus.SpeakerPool(split);
    const std::vector<bool> negative = NegativeMask(n, corpus.neg_fraction);
    std::vector<ManifestRecord> records;
    for (int64_t i = 0; i < n; ++i) {
      ManifestRecord r;
      r.id = fmt::format("{}_{:06d}", name, i);
      r.polarity = negative[i] ? Polarity::kNegative : Polarity::kPositive;
      r.seed = CorpusConfig::PairSeed(master_seed, split, i);
      const Scene s = MakeScene(scene, r.polarity, pool, r.seed);
      const TrainingPair p = ToPair(s, r.id);
      r.speaker_id = p.speaker_id;
      r.snr_db = p.snr_db;
      r.mixture_path = name + "/" + r.id + "_mix.wav";
      r.target_path = name + "/" + r.id + "_target.wav";
      r.enrollment_path = name + "/" + r.id + "_enroll.wav";
      WriteWav((staging / r.mixture_path).string(), {scene.sample_rate, p.mixture});
      WriteWav((staging / r.target_path).string(),
               {scene.sample_rate, p.target.Reshaped({1, p.target.size()})});
      WriteWav((staging / r.enrollment_path).string(),
               {scene.sample_rate, p.enrollment.Reshaped({1, p.enrollment.size()})});
      records.push_back(std::move(r));
    }
    WriteManifest((staging / (name + ".jsonl")).string(), records);
  }
  fs::remove_all(target, ec);
  if (ec) throw DataError("cannot replace " + out_dir + ": " + ec.message());
  fs::rename(staging, target, ec);
  if (ec) throw DataError("cannot move corpus into " + out_dir + ": " + ec.message());
}

}  // namespace promptse
