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

#ifndef PROMPTSE_SCENESIM_SPATIAL_H_
#define PROMPTSE_SCENESIM_SPATIAL_H_

#include <cstdint>
#include <optional>

#include "promptse/numerics/tensor.h"

namespace promptse {

// Uniform linear array; microphone m sits at m * spacing along the axis.
struct ArrayGeometry {
  int64_t mic_count = 2;
  double spacing_m = 0.05;
  double speed_of_sound = 343.0;

  void Validate() const;
  // Arrival delay at microphone m relative to microphone 0 for a far-field
  // source at `azimuth_deg` (0 = endfire, 90 = broadside).
  double DelaySamples(int64_t mic, double azimuth_deg, int sample_rate) const;

  bool operator==(const ArrayGeometry&) const = default;
};

// Synthetic late reverberation: `reflections` delayed copies arriving from
// random directions, decaying by 60 dB over `t60_s`.
struct ReverbSpec {
  double t60_s = 0.4;
  int reflections = 50;
  uint64_t seed = 0;
};

inline constexpr int kFractionalDelayTaps = 33;

// x delayed by `delay` samples (any sign) using a Hann-windowed sinc with
// kFractionalDelayTaps taps and unit DC gain. Samples shifted in from
// outside the signal are zero.
Tensor<double> FractionalDelay(const Tensor<double>& x, double delay);

// [C, N] microphone image of a mono source, attenuated by 1 / distance.
// Without `reverb` only the direct path is rendered.
Tensor<double> Spatialize(const Tensor<double>& source, const ArrayGeometry& array,
                          double azimuth_deg, double distance_m, int sample_rate,
                          const std::optional<ReverbSpec>& reverb = std::nullopt);

}  // namespace promptse

#endif  // PROMPTSE_SCENESIM_SPATIAL_H_
