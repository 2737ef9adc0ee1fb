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

// Synthetic speech-like sources: harmonic voiced segments shaped by a
// speaker-specific two-resonance envelope, noise bursts and pauses.

#ifndef PROMPTSE_SCENESIM_SYNTH_H_
#define PROMPTSE_SCENESIM_SYNTH_H_

#include <cstdint>

#include "promptse/numerics/tensor.h"

namespace promptse {

inline constexpr int kColoringTerms = 16;

// Voice characteristics fixed by the speaker id.
struct VoiceProfile {
  double f0_hz;            // mean fundamental, 80 to 300 Hz
  double formant_hz[2];    // resonance centres
  double bandwidth_hz[2];  // resonance half-widths
  double formant2_gain;    // second resonance relative to the first
  double tilt_db_per_octave;
  double vibrato_hz;
  double vibrato_depth;  // relative frequency deviation
  // Smooth spectral coloring: sum of coloring_db[k] * cos(pi (k+1) f / nyquist).
  double coloring_db[kColoringTerms];
  double nyquist_hz;
};

VoiceProfile SpeakerVoice(int64_t speaker_id, int sample_rate);

// Deterministic in (speaker_id, seed); peak amplitude 0.5. Requires
// duration_s >= 1 (ConfigError otherwise).
Tensor<double> SynthSpeechlike(int64_t speaker_id, double duration_s,
                               int sample_rate, uint64_t seed);

}  // namespace promptse

#endif  // PROMPTSE_SCENESIM_SYNTH_H_
