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

// Short-time Fourier analysis and overlap-add synthesis with a
// square-root periodic Hann window pair.
//
// Framing: (window - hop) samples of reflective padding precede the signal
// and frame t covers padded samples [t * hop, t * hop + window). A signal of
// N samples yields T = ceil(N / hop) frames, so concatenated signals whose
// lengths are hop multiples have frame counts that add up exactly. When N is
// not a hop multiple the tail is reflect-padded.
//
// Spectrograms are real tensors shaped [2, C, T, F] holding the real parts
// followed by the imaginary parts, F = window / 2 + 1.

#ifndef PROMPTSE_DSP_STFT_H_
#define PROMPTSE_DSP_STFT_H_

#include <cstdint>
#include <vector>

#include "promptse/numerics/tape.h"
#include "promptse/numerics/tensor.h"
#include "promptse/parse.h"

namespace promptse {

struct StftConfig {
  int sample_rate = 8000;
  int64_t window_length = 128;
  int64_t hop_length = 64;

  // 16 ms / 8 ms framing at the given rate.
  static StftConfig ForSampleRate(int sample_rate, double window_ms = 16.0,
                                  double hop_ms = 8.0);

  int64_t bins() const { return window_length / 2 + 1; }
  int64_t pad() const { return window_length - hop_length; }
  int64_t NumFrames(int64_t num_samples) const {
    return (num_samples + hop_length - 1) / hop_length;
  }
  // Throws ConfigError unless the window is even, positive and a multiple
  // of the hop.
  void Validate() const;

  // Keys "stft.sample_rate", "stft.window_length", "stft.hop_length".
  void Set(const std::string& key, const std::string& value);
  KeyValues Items() const;

  bool operator==(const StftConfig&) const = default;
};

// sqrt(0.5 - 0.5 cos(2 pi n / W)), n = 0..W-1.
std::vector<double> SqrtHannWindow(int64_t length);

// x: [C, N] -> [2, C, T, F].
template <typename T>
Tensor<T> Stft(const Tensor<T>& x, const StftConfig& config);

// spec: [2, T, F] (one channel) -> [length].
template <typename T>
Tensor<T> Istft(const Tensor<T>& spec, const StftConfig& config,
                int64_t length);

// Energy of a [2, C, T, F] spectrogram counting the mirrored half of the
// spectrum, divided by the window length. Equals the waveform energy for
// signals that vanish within one window of either end.
template <typename T>
double SpectralEnergy(const Tensor<T>& spec, const StftConfig& config);

namespace ops {

// Differentiable counterparts of the functions above.
template <typename T>
Var<T> Stft(const Var<T>& x, const StftConfig& config);

template <typename T>
Var<T> Istft(const Var<T>& spec, const StftConfig& config, int64_t length);

}  // namespace ops
}  // namespace promptse

#endif  // PROMPTSE_DSP_STFT_H_
