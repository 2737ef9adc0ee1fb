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

#include "promptse/cli/run_config.h"

#include <utility>

#include "fmt/format.h"
#include "promptse/error.h"
#include "promptse/io.h"

namespace promptse {
namespace {

bool HasPrefix(const std::string& key, const char* prefix) {
  return key.rfind(prefix, 0) == 0;
}

}  // namespace

void RunConfig::Set(const std::string& key, const std::string& value) {
  if (HasPrefix(key, "model.")) {
    model.Set(key, value);
  } else if (HasPrefix(key, "stft.")) {
    stft.Set(key, value);
    stft_set_ = true;
  } else if (HasPrefix(key, "train.") || HasPrefix(key, "loss.")) {
    train.Set(key, value);
  } else if (HasPrefix(key, "scene.")) {
    scene.Set(key, value);
  } else if (HasPrefix(key, "corpus.")) {
    corpus.Set(key, value);
  } else if (key == "synth.seed") {
    const int64_t seed = ParseInt(key, value);
    if (seed < 0) throw ConfigError("synth.seed must be >= 0, got " + value);
    synth_seed = static_cast<uint64_t>(seed);
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

void RunConfig::SetAll(const KeyValues& values) {
  for (const auto& [key, value] : values) Set(key, value);
}

KeyValues RunConfig::Items() const {
  KeyValues out;
  for (const KeyValues& part :
       {model.Items(), stft.Items(), train.Items(), scene.Items(), corpus.Items()}) {
    out.insert(part.begin(), part.end());
  }
  out["synth.seed"] = std::to_string(synth_seed);
  return out;
}

void RunConfig::ResolveStft() {
  if (!stft_set_) stft = StftConfig::ForSampleRate(scene.sample_rate);
}

void RunConfig::Finalize() {
  ResolveStft();
  model.Validate();
  stft.Validate();
  train.Validate();
  corpus.Validate();
  scene.Validate(stft.hop_length);
  if (stft.sample_rate != scene.sample_rate) {
    throw ConfigError(fmt::format("stft.sample_rate ({}) differs from scene.sample_rate ({})",
                                  stft.sample_rate, scene.sample_rate));
  }
  if (scene.array.mic_count != model.channels) {
    throw ConfigError(fmt::format("scene.mic_count ({}) differs from model.channels ({})",
                                  scene.array.mic_count, model.channels));
  }
}

KeyValues ReadConfigFile(const std::string& path) {
  std::string text;
  try {
    text = ReadFile(path);
  } catch (const DataError& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
  try {
    return ParseKeyValueText(text);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
}

std::pair<std::string, std::string> SplitAssignment(const std::string& text) {
  const size_t eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("expected key=value, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

}  // namespace promptse
