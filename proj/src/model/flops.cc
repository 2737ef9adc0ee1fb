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

#include "promptse/model/flops.h"

#include <cmath>

#include "promptse/error.h"

namespace promptse {

double BlockMacsPerUnit(const ModelConfig& c) {
  const double d = double(c.embed_dim), h = double(c.hidden);
  const double recurrence = 2.0 * 4.0 * h * (d + h);  // both directions
  const double projection = 2.0 * h * d;
  return 2.0 * (recurrence + projection);
}

FlopBreakdown EstimateFlops(const ModelConfig& c, const StftConfig& stft,
                            double mix_seconds, double enroll_seconds) {
  c.Validate();
  stft.Validate();
  if (!(mix_seconds > 0) || !(enroll_seconds > 0)) {
    throw ConfigError("mixture and enrollment durations must be positive");
  }
  const int64_t mix_samples = std::llround(mix_seconds * stft.sample_rate);
  const int64_t enroll_samples =
      std::llround(enroll_seconds * stft.sample_rate) / stft.hop_length * stft.hop_length;
  FlopBreakdown b;
  b.mix_frames = stft.NumFrames(mix_samples);
  b.enroll_frames = enroll_samples / stft.hop_length;
  const double f = double(stft.bins()), d = double(c.embed_dim);
  const double k = double(c.speaker_dim);

  b.encoder = double(b.enroll_frames + b.mix_frames) * f * d *
              double(2 * c.channels + 1) * 9.0;
  int64_t frames = b.enroll_frames;
  for (int64_t g = 0; g < c.downsample_depth; ++g) {
    frames = (frames + 1) / 2;
    b.downsampler += double(frames) * f * d * d * 9.0;
  }
  b.enroll_frames_downsampled = frames;

  const double unit = BlockMacsPerUnit(c);
  const double full = double(frames + b.mix_frames) * f;
  const double mix = double(b.mix_frames) * f;
  b.blocks = unit * (double(c.enroll_blocks) * full +
                     double(c.blocks - c.enroll_blocks) * mix);

  const double applications = double(FusionBlockIndices(c).size());
  switch (c.fusion) {
    case FusionKind::kAddition:
    case FusionKind::kMultiplication:
      b.fusion = applications * k * d;
      break;
    case FusionKind::kFilm:
      b.fusion = applications * 2.0 * k * d;
      break;
    case FusionKind::kConcatenation:
      b.fusion = applications * (k * d + mix * 2.0 * d * d);
      break;
    case FusionKind::kNone:
      break;
  }
  if (c.fusion != FusionKind::kNone) {
    const double m = double(c.embedder_hidden);
    b.embedder = double(b.enroll_frames) * (f * m + m * m) + 2.0 * m * k;
  }
  b.decoder = mix * d * 2.0 * 9.0;
  b.total = b.encoder + b.downsampler + b.blocks + b.fusion + b.embedder + b.decoder;
  b.per_second = b.total / mix_seconds;
  return b;
}

}  // namespace promptse
