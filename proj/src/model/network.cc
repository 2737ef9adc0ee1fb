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

#include "promptse/model/network.h"

#include <algorithm>
#include <cmath>

#include "fmt/format.h"
#include "promptse/dsp/features.h"
#include "promptse/error.h"
#include "promptse/numerics/ops.h"
#include "promptse/numerics/recurrence.h"

namespace promptse::model {
namespace {

const std::vector<int> kToChannelsLast = {1, 2, 0};   // [D,T,F] -> [T,F,D]
const std::vector<int> kToChannelsFirst = {2, 0, 1};  // [T,F,D] -> [D,T,F]

ops::Conv2dGeometry SamePadding() {
  ops::Conv2dGeometry g;
  g.padding = {1, 1};
  return g;
}

// LayerNorm, bidirectional recurrence over axis 1, projection, residual.
template <typename T>
Var<T> RecurrentUnit(const BoundParams<T>& p, const std::string& prefix,
                     const Var<T>& x) {
  Var<T> h = ops::LayerNorm(x, p[prefix + ".norm.gamma"], p[prefix + ".norm.beta"]);
  auto weights = [&](const char* dir) {
    const std::string r = prefix + ".rnn." + dir;
    return ops::LstmWeights<T>{p[r + ".input_weight"], p[r + ".hidden_weight"],
                               p[r + ".bias"]};
  };
  h = ops::BidirectionalLstm(h, weights("fwd"), weights("bwd"));
  h = ops::Linear(h, p[prefix + ".proj.weight"], p[prefix + ".proj.bias"]);
  return ops::Add(x, h);
}

// z: [T, F, D].
template <typename T>
Var<T> GridBlockChannelsLast(const BoundParams<T>& p, int64_t index,
                             const Var<T>& z) {
  const std::string prefix = fmt::format("block.{}", index);
  Var<T> y = RecurrentUnit(p, prefix + ".intra", z);
  Var<T> yt = ops::Permute(y, {1, 0, 2});
  return ops::Permute(RecurrentUnit(p, prefix + ".inter", yt), {1, 0, 2});
}

template <typename T>
Var<T> Project(const BoundParams<T>& p, const std::string& prefix,
               const Var<T>& v) {
  Var<T> y = ops::Linear(ops::Reshape(v, {1, v.value().size()}),
                         p[prefix + ".weight"], p[prefix + ".bias"]);
  return ops::Reshape(y, {y.value().size()});
}

// z: [T, F, D], v: [K].
template <typename T>
Var<T> FuseChannelsLast(const BoundParams<T>& p, const ModelConfig& config,
                        int64_t index, const Var<T>& z, const Var<T>& v) {
  if (!v.valid()) throw ConfigError("fusion requires a speaker embedding");
  if (v.rank() != 1 || v.dim(0) != config.speaker_dim) {
    throw ShapeError(fmt::format("fusion: embedding shape {}, expected [{}]",
                                 ShapeString(v.shape()), config.speaker_dim));
  }
  const std::string prefix = fmt::format("fusion.{}", index);
  switch (config.fusion) {
    case FusionKind::kAddition:
      return ops::AddChannels(z, Project(p, prefix, v));
    case FusionKind::kMultiplication:
      return ops::MulChannels(z, Project(p, prefix, v));
    case FusionKind::kFilm:
      return ops::AddChannels(ops::MulChannels(z, Project(p, prefix + ".gamma", v)),
                              Project(p, prefix + ".beta", v));
    case FusionKind::kConcatenation: {
      Var<T> e = Project(p, prefix + ".embed", v);
      Var<T> tiled = ops::AddChannels(z.tape()->Constant(Tensor<T>(z.shape())), e);
      Var<T> cat = ops::Concat<T>({z, tiled}, z.rank() - 1);
      return ops::Linear(cat, p[prefix + ".proj.weight"], p[prefix + ".proj.bias"]);
    }
    case FusionKind::kNone:
      break;
  }
  throw ConfigError("fusion kind 'none' cannot be applied");
}

}  // namespace

template <typename T>
Var<T> Encode(const BoundParams<T>& p, const ModelConfig& config,
              const Var<T>& features) {
  if (features.rank() != 3 || features.dim(0) != 2 * config.channels + 1) {
    throw ConfigError(fmt::format(
        "encoder expects [{}, T, F] features for {} channels, got {}",
        2 * config.channels + 1, config.channels, ShapeString(features.shape())));
  }
  return ops::Conv2d(features, p["encoder.weight"], p["encoder.bias"], SamePadding());
}

template <typename T>
Var<T> DownsampleEnrollment(const BoundParams<T>& p, const ModelConfig& config,
                            const Var<T>& enroll) {
  const int64_t depth = config.downsample_depth;
  if (depth < 1) throw ConfigError("downsampler depth must be >= 1");
  if (enroll.rank() != 3) {
    throw ShapeError("downsampler expects [D, T, F], got " + ShapeString(enroll.shape()));
  }
  if (enroll.dim(1) < (int64_t{1} << depth)) {
    throw ConfigError(fmt::format(
        "enrollment of {} frames is too short for downsampler depth {} (needs >= {})",
        enroll.dim(1), depth, int64_t{1} << depth));
  }
  ops::Conv2dGeometry geo;
  geo.stride = {2, 1};
  geo.padding = {1, 1};
  Var<T> x = enroll;
  for (int64_t g = 0; g < depth; ++g) {
    const std::string prefix = fmt::format("downsample.{}", g);
    x = ops::GroupNorm(x, static_cast<int>(config.norm_groups),
                       p[prefix + ".norm.gamma"], p[prefix + ".norm.beta"]);
    x = ops::Relu(x);
    x = ops::Conv2d(x, p[prefix + ".conv.weight"], p[prefix + ".conv.bias"], geo);
  }
  return x;
}

// x * sigmoid(x).
template <typename T>
Var<T> Silu(const Var<T>& x) {
  return ops::Mul(x, ops::Sigmoid(x));
}

template <typename T>
Var<T> SpeakerEmbedding(const BoundParams<T>& p, const ModelConfig& /*config*/,
                        const StftConfig& stft, const Tensor<T>& enrollment) {
  if (enrollment.rank() != 1) {
    throw ShapeError("speaker embedding expects [E], got " +
                     ShapeString(enrollment.shape()));
  }
  if (2 * enrollment.dim(0) < stft.sample_rate) {
    throw DataError(fmt::format(
        "enrollment of {} samples is shorter than 0.5 s at {} Hz",
        enrollment.dim(0), stft.sample_rate));
  }
  const Tensor<T> spec = Stft(enrollment.Reshaped({1, enrollment.dim(0)}), stft);
  const int64_t frames = spec.dim(2), bins = spec.dim(3);
  const int64_t plane = frames * bins;
  Tensor<T> logmag({frames, bins});
  for (int64_t i = 0; i < plane; ++i) {
    logmag[i] = std::log(std::hypot(spec[i], spec[plane + i]) + T(1e-5));
  }
  Tape<T>* tape = p.tape();
  Var<T> h = tape->Constant(std::move(logmag));
  h = Silu(ops::Linear(h, p["embedder.layer1.weight"], p["embedder.layer1.bias"]));
  h = Silu(ops::Linear(h, p["embedder.layer2.weight"], p["embedder.layer2.bias"]));
  const double inv = 1.0 / double(frames);
  Var<T> mean = ops::Affine(ops::SumRows(h), inv);
  Var<T> centered = ops::AddChannels(h, ops::Affine(mean, -1.0));
  Var<T> var = ops::Affine(ops::SumRows(ops::Square(centered)), inv);
  Var<T> std = ops::Sqrt(ops::Affine(var, 1.0, 1e-5));
  Var<T> pooled = ops::Concat<T>({mean, std}, 0);
  Var<T> z = Project(p, "embedder.out", pooled);
  Var<T> norm = ops::Sqrt(ops::Affine(ops::Dot(z, z), 1.0, 1e-12));
  return ops::Div(z, norm);
}

template <typename T>
Var<T> Fuse(const BoundParams<T>& p, const ModelConfig& config, int64_t index,
            const Var<T>& z, const Var<T>& v) {
  if (z.rank() != 3) throw ShapeError("fusion expects [D, T, F], got " + ShapeString(z.shape()));
  Var<T> y = FuseChannelsLast(p, config, index, ops::Permute(z, kToChannelsLast), v);
  return ops::Permute(y, kToChannelsFirst);
}

template <typename T>
Var<T> GridBlock(const BoundParams<T>& p, const ModelConfig& config,
                 int64_t index, const Var<T>& z) {
  if (z.rank() != 3 || z.dim(0) != config.embed_dim) {
    throw ShapeError(fmt::format("grid block expects [{}, T, F], got {}",
                                 config.embed_dim, ShapeString(z.shape())));
  }
  Var<T> y = GridBlockChannelsLast(p, index, ops::Permute(z, kToChannelsLast));
  return ops::Permute(y, kToChannelsFirst);
}

template <typename T>
Var<T> ForwardBlocks(const BoundParams<T>& p, const ModelConfig& config,
                     const Var<T>& u, int64_t mix_frames, const Var<T>& v) {
  if (u.rank() != 3 || u.dim(0) != config.embed_dim) {
    throw ShapeError(fmt::format("blocks expect [{}, T, F], got {}",
                                 config.embed_dim, ShapeString(u.shape())));
  }
  const int64_t total = u.dim(1);
  if (mix_frames < 1 || mix_frames > total) {
    throw Error(fmt::format("frame bookkeeping: {} mixture frames of {} total",
                            mix_frames, total));
  }
  const std::vector<int64_t> fused = FusionBlockIndices(config);
  Var<T> z = ops::Permute(u, kToChannelsLast);
  for (int64_t j = 0; j < config.blocks; ++j) {
    z = GridBlockChannelsLast(p, j, z);
    if (j == config.enroll_blocks - 1) {
      z = ops::SliceAxis(z, 0, total - mix_frames, mix_frames);
    }
    if (std::find(fused.begin(), fused.end(), j) != fused.end()) {
      z = FuseChannelsLast(p, config, j, z, v);
    }
  }
  return ops::Permute(z, kToChannelsFirst);
}

template <typename T>
Var<T> Decode(const BoundParams<T>& p, const ModelConfig& config,
              const Var<T>& z) {
  if (z.rank() != 3 || z.dim(0) != config.embed_dim) {
    throw ShapeError(fmt::format("decoder expects [{}, T, F], got {}",
                                 config.embed_dim, ShapeString(z.shape())));
  }
  return ops::Deconv2d(z, p["decoder.weight"], p["decoder.bias"], SamePadding());
}

template <typename T>
ExtractOutput<T> Extract(const BoundParams<T>& p, const ModelConfig& config,
                         const StftConfig& stft, const Tensor<T>& mixture,
                         const Tensor<T>& enrollment) {
  config.Validate();
  stft.Validate();
  if (mixture.rank() != 2 || mixture.dim(0) != config.channels) {
    throw ConfigError(fmt::format("mixture shape {} does not match {} channels",
                                  ShapeString(mixture.shape()), config.channels));
  }
  const int64_t n = mixture.dim(1);
  const Tensor<T> e = TrimToHop(enrollment, stft.hop_length);
  PromptedMixture<T> prompted = PrependEnrollment(e, mixture, stft);

  double power = 0;
  for (T s : mixture.values()) power += double(s) * double(s);
  double scale = std::sqrt(power / double(mixture.size()));
  if (!(scale > 0)) scale = 1.0;
  for (auto& s : prompted.signal.values()) s = T(s / scale);

  Tape<T>* tape = p.tape();
  Var<T> features =
      tape->Constant(StackRiMag(Stft(prompted.signal, stft), config.ref_channel));
  Var<T> h = Encode(p, config, features);

  ExtractOutput<T> out;
  out.enroll_frames = prompted.enroll_frames;
  out.mix_frames = prompted.mix_frames;
  out.enroll_frames_downsampled = prompted.enroll_frames;
  Var<T> u = h;
  if (config.downsample_depth > 0) {
    Var<T> he = ops::SliceAxis(h, 1, 0, prompted.enroll_frames);
    Var<T> hm = ops::SliceAxis(h, 1, prompted.enroll_frames, prompted.mix_frames);
    Var<T> hd = DownsampleEnrollment(p, config, he);
    out.enroll_frames_downsampled = hd.dim(1);
    u = ops::Concat<T>({hd, hm}, 1);
  }
  if (config.fusion != FusionKind::kNone) {
    out.embedding = SpeakerEmbedding(p, config, stft, e);
  }
  Var<T> z = ForwardBlocks(p, config, u, prompted.mix_frames, out.embedding);
  out.spectrogram = Decode(p, config, z);
  out.waveform = ops::Affine(ops::Istft(out.spectrogram, stft, n), scale);
  return out;
}

Tensor<float> ExtractWaveform(const ParamMap& params, const ModelConfig& config,
                              const StftConfig& stft, const Tensor<float>& mixture,
                              const Tensor<float>& enrollment) {
  Tape<float> tape;
  BoundParams<float> p(tape, params, /*trainable=*/false);
  return Extract(p, config, stft, mixture, enrollment).waveform.value();
}

#define PROMPTSE_INSTANTIATE_NETWORK(T)                                         \
  template Var<T> Encode(const BoundParams<T>&, const ModelConfig&,             \
                         const Var<T>&);                                        \
  template Var<T> DownsampleEnrollment(const BoundParams<T>&,                   \
                                       const ModelConfig&, const Var<T>&);      \
  template Var<T> SpeakerEmbedding(const BoundParams<T>&, const ModelConfig&,   \
                                   const StftConfig&, const Tensor<T>&);        \
  template Var<T> Fuse(const BoundParams<T>&, const ModelConfig&, int64_t,      \
                       const Var<T>&, const Var<T>&);                           \
  template Var<T> GridBlock(const BoundParams<T>&, const ModelConfig&, int64_t, \
                            const Var<T>&);                                     \
  template Var<T> ForwardBlocks(const BoundParams<T>&, const ModelConfig&,      \
                                const Var<T>&, int64_t, const Var<T>&);         \
  template Var<T> Decode(const BoundParams<T>&, const ModelConfig&,             \
                         const Var<T>&);                                        \
  template ExtractOutput<T> Extract(const BoundParams<T>&, const ModelConfig&,  \
                                    const StftConfig&, const Tensor<T>&,        \
                                    const Tensor<T>&);

PROMPTSE_INSTANTIATE_NETWORK(float)
PROMPTSE_INSTANTIATE_NETWORK(double)

}  // namespace promptse::model
