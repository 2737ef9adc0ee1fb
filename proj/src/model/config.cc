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

#include "promptse/model/config.h"

#include <bit>
#include <cmath>

#include "fmt/format.h"
#include "promptse/error.h"

namespace promptse {
namespace {

struct Field {
  const char* key;
  int64_t ModelConfig::*member;
};

constexpr Field kIntFields[] = {
    {"model.channels", &ModelConfig::channels},
    {"model.embed_dim", &ModelConfig::embed_dim},
    {"model.blocks", &ModelConfig::blocks},
    {"model.enroll_blocks", &ModelConfig::enroll_blocks},
    {"model.downsample_depth", &ModelConfig::downsample_depth},
    {"model.speaker_dim", &ModelConfig::speaker_dim},
    {"model.hidden", &ModelConfig::hidden},
    {"model.unfold_kernel", &ModelConfig::unfold_kernel},
    {"model.unfold_stride", &ModelConfig::unfold_stride},
    {"model.embedder_hidden", &ModelConfig::embedder_hidden},
    {"model.norm_groups", &ModelConfig::norm_groups},
    {"model.ref_channel", &ModelConfig::ref_channel},
};

}  // namespace

FusionKind ParseFusionKind(const std::string& name) {
  if (name == "none") return FusionKind::kNone;
  if (name == "concatenation") return FusionKind::kConcatenation;
  if (name == "addition") return FusionKind::kAddition;
  if (name == "multiplication") return FusionKind::kMultiplication;
  if (name == "film") return FusionKind::kFilm;
  throw ConfigError("unknown fusion kind '" + name +
                    "' (none, concatenation, addition, multiplication, film)");
}

const char* FusionKindName(FusionKind kind) {
  switch (kind) {
    case FusionKind::kNone: return "none";
    case FusionKind::kConcatenation: return "concatenation";
    case FusionKind::kAddition: return "addition";
    case FusionKind::kMultiplication: return "multiplication";
    case FusionKind::kFilm: return "film";
  }
  return "none";
}

ModelConfig ModelConfig::V1() {
  ModelConfig c;
  c.blocks = 4;
  c.enroll_blocks = 4;
  c.embed_dim = 128;
  c.hidden = 200;
  return c;
}

ModelConfig ModelConfig::V2() {
  ModelConfig c;
  c.blocks = 6;
  c.enroll_blocks = 6;
  c.embed_dim = 128;
  c.hidden = 256;
  return c;
}

void ModelConfig::Validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(channels >= 1, fmt::format("model.channels must be >= 1, got {}", channels));
  need(embed_dim >= 1, fmt::format("model.embed_dim must be >= 1, got {}", embed_dim));
  need(blocks >= 1, fmt::format("model.blocks must be >= 1, got {}", blocks));
  need(enroll_blocks >= 1 && enroll_blocks <= blocks,
       fmt::format("model.enroll_blocks must lie in [1, {}], got {}", blocks,
                   enroll_blocks));
  need(downsample_depth >= 0,
       fmt::format("model.downsample_depth must be >= 0, got {}", downsample_depth));
  need(speaker_dim >= 1, fmt::format("model.speaker_dim must be >= 1, got {}", speaker_dim));
  need(hidden >= 1, fmt::format("model.hidden must be >= 1, got {}", hidden));
  need(unfold_kernel == 1 && unfold_stride == 1,
       "only model.unfold_kernel = model.unfold_stride = 1 is supported");
  need(embedder_hidden >= 1,
       fmt::format("model.embedder_hidden must be >= 1, got {}", embedder_hidden));
  need(norm_groups >= 1 && embed_dim % norm_groups == 0,
       fmt::format("model.norm_groups ({}) must divide model.embed_dim ({})",
                   norm_groups, embed_dim));
  need(ref_channel >= 0 && ref_channel < channels,
       fmt::format("model.ref_channel must lie in [0, {}), got {}", channels,
                   ref_channel));
}

void ModelConfig::Set(const std::string& key, const std::string& value) {
  if (key == "model.fusion") {
    fusion = ParseFusionKind(value);
    return;
  }
  for (const Field& f : kIntFields) {
    if (key == f.key) {
      this->*f.member = ParseInt(key, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

KeyValues ModelConfig::Items() const {
  KeyValues out;
  for (const Field& f : kIntFields) out[f.key] = std::to_string(this->*f.member);
  out["model.fusion"] = FusionKindName(fusion);
  return out;
}

ModelConfig ModelConfig::FromItems(const KeyValues& items) {
  ModelConfig c;
  for (const auto& [k, v] : items) c.Set(k, v);
  c.Validate();
  return c;
}

std::vector<int64_t> FusionBlockIndices(const ModelConfig& config) {
  std::vector<int64_t> out;
  if (config.fusion == FusionKind::kNone) return out;
  if (config.enroll_blocks == config.blocks) return {config.blocks - 1};
  for (int64_t j = config.enroll_blocks; j < config.blocks; ++j) out.push_back(j);
  return out;
}

int64_t DownsampleDepthFor(double enroll_seconds, double target_seconds) {
  if (!(enroll_seconds > 0) || !(target_seconds > 0)) {
    throw ConfigError("enrollment durations must be positive");
  }
  const double ratio = std::floor(enroll_seconds / target_seconds);
  if (ratio < 1) {
    throw ConfigError("target enrollment length exceeds the enrollment");
  }
  const auto r = static_cast<uint64_t>(ratio);
  if (!std::has_single_bit(r)) {
    throw ConfigError(fmt::format(
        "enrollment ratio {} is not a power of two; no whole downsampler depth", r));
  }
  return std::countr_zero(r);
}

}  // namespace promptse
