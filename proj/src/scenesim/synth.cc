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

#include "promptse/scenesim/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "promptse/error.h"
#include "promptse/numerics/random.h"

namespace promptse {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr uint64_t kVoiceStream = 0x766F696365ULL;
constexpr uint64_t kUtteranceStream = 0x7574746572ULL;

// Spectral envelope magnitude at `hz` with resonances scaled by `shift`.
double Envelope(const VoiceProfile& v, double hz, double shift) {
  double e = 0.3;
  const double weight[2] = {1.0, v.formant2_gain};
  for (int r = 0; r < 2; ++r) {
    const double u = (hz - v.formant_hz[r] * shift) / v.bandwidth_hz[r];
    e += weight[r] / (1.0 + u * u);
  }
  double db = v.tilt_db_per_octave * std::log2(hz / 100.0);
  for (int k = 0; k < kColoringTerms; ++k) {
    db += v.coloring_db[k] * std::cos(std::numbers::pi * (k + 1) * hz / v.nyquist_hz);
  }
  return e * std::pow(10.0, db / 20.0);
}

// Raised-cosine fade in and out over `ramp` samples.
double Fade(int64_t i, int64_t n, int64_t ramp) {
  const int64_t edge = std::min(i, n - 1 - i);
  if (edge >= ramp) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * double(edge) / double(ramp));
}

void Voiced(const VoiceProfile& v, int sr, Rng& rng, double* out, int64_t n) {
  const double f_start = v.f0_hz * std::exp(0.08 * rng.Normal());
  const double f_end = v.f0_hz * std::exp(0.08 * rng.Normal());
  const double shift = std::exp(0.06 * rng.Normal());
  const double gain = rng.Uniform(0.5, 1.0);
  const double vib_phase = rng.Uniform(0.0, kTwoPi);
  const double f_max = std::max(f_start, f_end) * (1.0 + v.vibrato_depth);
  const int harmonics = std::max(1, int(0.45 * sr / f_max));
  std::vector<double> amp(harmonics);
  const double f_mid = 0.5 * (f_start + f_end);
  for (int k = 0; k < harmonics; ++k) amp[k] = Envelope(v, (k + 1) * f_mid, shift);
  const int64_t ramp = std::max<int64_t>(1, sr / 60);
  double phase = rng.Uniform(0.0, kTwoPi);
  for (int64_t i = 0; i < n; ++i) {
    const double t = double(i) / sr;
    const double glide = f_start + (f_end - f_start) * double(i) / double(n);
    const double f = glide * (1.0 + v.vibrato_depth * std::sin(kTwoPi * v.vibrato_hz * t + vib_phase));
    phase = std::fmod(phase + kTwoPi * f / sr, kTwoPi);
    double s = 0;
    for (int k = 0; k < harmonics; ++k) s += amp[k] * std::sin((k + 1) * phase);
    out[i] = gain * Fade(i, n, ramp) * s;
  }
}

// White noise through a two-pole resonator above the second formant.
void Unvoiced(const VoiceProfile& v, int sr, Rng& rng, double* out, int64_t n) {
  const double centre = std::min(0.38 * sr, v.formant_hz[1] + 0.1 * sr);
  const double radius = 0.85;
  const double a1 = -2.0 * radius * std::cos(kTwoPi * centre / sr);
  const double a2 = radius * radius;
  const double gain = rng.Uniform(0.05, 0.15);
  const int64_t ramp = std::max<int64_t>(1, sr / 200);
  double y1 = 0, y2 = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double y = rng.Normal() - a1 * y1 - a2 * y2;
    y2 = y1;
    y1 = y;
    out[i] = gain * (1.0 - radius) * Fade(i, n, ramp) * y;
  }
}

}  // namespace

VoiceProfile SpeakerVoice(int64_t speaker_id, int sample_rate) {
  Rng rng(Rng::Mix(static_cast<uint64_t>(speaker_id), kVoiceStream));
  const double nyquist = 0.5 * sample_rate;
  VoiceProfile v;
  v.f0_hz = 80.0 * std::pow(300.0 / 80.0, rng.Uniform());
  v.formant_hz[0] = std::min(rng.Uniform(250.0, 1000.0), 0.3 * nyquist);
  v.formant_hz[1] = std::min(rng.Uniform(900.0, 3000.0), 0.75 * nyquist);
  v.bandwidth_hz[0] = rng.Uniform(60.0, 150.0);
  v.bandwidth_hz[1] = rng.Uniform(90.0, 250.0);
  v.tilt_db_per_octave = rng.Uniform(-6.0, -1.0);
  v.formant2_gain = rng.Uniform(0.2, 1.0);
  v.vibrato_hz = rng.Uniform(4.0, 7.0);
  v.vibrato_depth = rng.Uniform(0.005, 0.03);
  v.nyquist_hz = nyquist;
  for (double& c : v.coloring_db) c = rng.Uniform(-7.0, 7.0);
  return v;
}

Tensor<double> SynthSpeechlike(int64_t speaker_id, double duration_s,
                               int sample_rate, uint64_t seed) {
  if (!(duration_s >= 1.0)) {
    throw ConfigError("speech-like synthesis needs at least 1 s, got " +
                      std::to_string(duration_s));
  }
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  const VoiceProfile voice = SpeakerVoice(speaker_id, sample_rate);
  Rng rng(Rng::Mix(Rng::Mix(static_cast<uint64_t>(speaker_id), kUtteranceStream), seed));
  const int64_t n = std::llround(duration_s * sample_rate);
  Tensor<double> x({n});
  int64_t pos = 0;
  bool first = true;
  while (pos < n) {
    const double kind = first ? 1.0 : rng.Uniform();
    first = false;
    double seconds;
    if (kind < 0.15) {
      seconds = rng.Uniform(0.05, 0.25);
    } else if (kind < 0.35) {
      seconds = rng.Uniform(0.04, 0.12);
    } else {
      seconds = rng.Uniform(0.12, 0.35);
    }
    const int64_t len = std::min<int64_t>(n - pos, std::max<int64_t>(1, std::llround(seconds * sample_rate)));
    if (kind >= 0.35) {
      Voiced(voice, sample_rate, rng, x.data() + pos, len);
    } else if (kind >= 0.15) {
      Unvoiced(voice, sample_rate, rng, x.data() + pos, len);
    }
    pos += len;
  }
  double peak = 0;
  for (double v : x.values()) peak = std::max(peak, std::abs(v));
  if (peak > 0) {
    for (double& v : x.values()) v *= 0.5 / peak;
  }
  return x;
}

}  // namespace promptse
