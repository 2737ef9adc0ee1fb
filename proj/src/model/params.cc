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

#include "promptse/model/params.h"

#include <cmath>

#include "fmt/format.h"
#include "promptse/error.h"
#include "promptse/numerics/random.h"

namespace promptse {
namespace {

uint64_t Fnv1a(const std::string& s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

bool EndsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void AddRecurrence(ShapeMap& m, const std::string& prefix, int64_t in,
                   int64_t hidden) {
  for (const char* dir : {"fwd", "bwd"}) {
    const std::string p = prefix + ".rnn." + dir;
    m[p + ".input_weight"] = {4 * hidden, in};
    m[p + ".hidden_weight"] = {4 * hidden, hidden};
    m[p + ".bias"] = {4 * hidden};
  }
}

void AddLinear(ShapeMap& m, const std::string& prefix, int64_t out, int64_t in) {
  m[prefix + ".weight"] = {out, in};
  m[prefix + ".bias"] = {out};
}

// Fan-in of the weight that a bias or weight tensor belongs to.
int64_t FanIn(const ShapeMap& shapes, const std::string& name) {
  std::string weight = name;
  if (EndsWith(name, ".bias")) {
    weight = name.substr(0, name.size() - 5) + ".weight";
    if (!shapes.count(weight)) weight = name.substr(0, name.size() - 5) + ".hidden_weight";
  }
  const Shape& s = shapes.at(weight);
  if (EndsWith(weight, "decoder.weight")) return s[0] * s[2] * s[3];
  int64_t fan = 1;
  for (size_t i = 1; i < s.size(); ++i) fan *= s[i];
  return fan;
}

}  // namespace

ShapeMap ParamShapes(const ModelConfig& c, const StftConfig& stft) {
  c.Validate();
  const int64_t d = c.embed_dim, h = c.hidden, k = c.speaker_dim;
  const int64_t m = c.embedder_hidden, f = stft.bins();
  ShapeMap s;
  s["encoder.weight"] = {d, 2 * c.channels + 1, 3, 3};
  s["encoder.bias"] = {d};
  for (int64_t g = 0; g < c.downsample_depth; ++g) {
    const std::string p = fmt::format("downsample.{}", g);
    s[p + ".norm.gamma"] = {d};
    s[p + ".norm.beta"] = {d};
    s[p + ".conv.weight"] = {d, d, 3, 3};
    s[p + ".conv.bias"] = {d};
  }
  for (int64_t j = 0; j < c.blocks; ++j) {
    for (const char* unit : {"intra", "inter"}) {
      const std::string p = fmt::format("block.{}.{}", j, unit);
      s[p + ".norm.gamma"] = {d};
      s[p + ".norm.beta"] = {d};
      AddRecurrence(s, p, d, h);
      AddLinear(s, p + ".proj", d, 2 * h);
    }
  }
  if (c.fusion != FusionKind::kNone) {
    for (int64_t j : FusionBlockIndices(c)) {
      const std::string p = fmt::format("fusion.{}", j);
      switch (c.fusion) {
        case FusionKind::kAddition:
        case FusionKind::kMultiplication:
          AddLinear(s, p, d, k);
          break;
        case FusionKind::kFilm:
          AddLinear(s, p + ".gamma", d, k);
          AddLinear(s, p + ".beta", d, k);
          break;
        case FusionKind::kConcatenation:
          AddLinear(s, p + ".embed", d, k);
          AddLinear(s, p + ".proj", d, 2 * d);
          break;
        case FusionKind::kNone:
          break;
      }
    }
    AddLinear(s, "embedder.layer1", m, f);
    AddLinear(s, "embedder.layer2", m, m);
    AddLinear(s, "embedder.out", k, 2 * m);
  }
  s["decoder.weight"] = {d, 2, 3, 3};
  s["decoder.bias"] = {2};
  return s;
}

ParamMap InitParams(const ModelConfig& config, const StftConfig& stft,
                    uint64_t seed) {
  const ShapeMap shapes = ParamShapes(config, stft);
  ParamMap out;
  for (const auto& [name, shape] : shapes) {
    Tensor<float> t(shape);
    // A separate stream per name keeps each tensor independent of which
    // other parameters the configuration has.
    Rng rng(Rng::Mix(seed, Fnv1a(name)));
    if (EndsWith(name, ".norm.gamma")) {
      t.Fill(1.0f);
    } else if (EndsWith(name, ".norm.beta")) {
      // zeros
    } else if (config.fusion == FusionKind::kMultiplication &&
               name.rfind("fusion.", 0) == 0 && EndsWith(name, ".bias")) {
      t.Fill(1.0f);
    } else if (EndsWith(name, ".gamma.bias")) {
      t.Fill(1.0f);
    } else if (EndsWith(name, ".beta.bias")) {
      // zeros
    } else {
      const double bound = 1.0 / std::sqrt(double(FanIn(shapes, name)));
      for (auto& v : t.values()) v = float(rng.Uniform(-bound, bound));
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

void ValidateParams(const ParamMap& params, const ModelConfig& config,
                    const StftConfig& stft) {
  const ShapeMap shapes = ParamShapes(config, stft);
  for (const auto& [name, shape] : shapes) {
    auto it = params.find(name);
    if (it == params.end()) throw DataError("missing parameter " + name);
    if (it->second.shape() != shape) {
      throw DataError(fmt::format("parameter {} has shape {}, expected {}", name,
                                  ShapeString(it->second.shape()), ShapeString(shape)));
    }
    if (!AllFinite(it->second)) throw DataError("parameter " + name + " is not finite");
  }
  for (const auto& [name, t] : params) {
    if (!shapes.count(name)) throw DataError("unexpected parameter " + name);
  }
}

int64_t CountParams(const ParamMap& params) {
  int64_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

template <typename T>
BoundParams<T>::BoundParams(Tape<T>& tape, const ParamMap& params,
                            bool trainable)
    : tape_(&tape) {
  for (const auto& [name, t] : params) {
    Tensor<T> v = t.template Cast<T>();
    vars_.emplace(name, trainable ? tape.Variable(std::move(v))
                                  : tape.Constant(std::move(v)));
  }
}

template <typename T>
const Var<T>& BoundParams<T>::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw DataError("missing parameter " + name);
  return it->second;
}

template class BoundParams<float>;
template class BoundParams<double>;

}  // namespace promptse
