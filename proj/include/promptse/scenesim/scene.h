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

// Multi-microphone scenes and (mixture, target, enrollment) training pairs.

#ifndef PROMPTSE_SCENESIM_SCENE_H_
#define PROMPTSE_SCENESIM_SCENE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "promptse/numerics/tensor.h"
#include "promptse/objectives/report.h"
#include "promptse/parse.h"
#include "promptse/scenesim/spatial.h"

namespace promptse {

struct SceneConfig {
  int64_t n_sources = 2;
  double snr_min_db = 5.0;
  double snr_max_db = 15.0;
  bool reverb = false;
  double t60_min_s = 0.2;
  double t60_max_s = 0.6;
  int reflections = 50;
  double duration_s = 4.0;
  double enroll_duration_s = 4.0;
  int sample_rate = 8000;
  ArrayGeometry array;

  // Durations must give whole multiples of `hop_length` samples.
  void Validate(int64_t hop_length) const;
  int64_t samples() const;
  int64_t enroll_samples() const;

  // Keys "scene.*"; the array uses scene.mic_count, scene.mic_spacing and
  // scene.speed_of_sound.
  void Set(const std::string& key, const std::string& value);
  KeyValues Items() const;

  bool operator==(const SceneConfig&) const = default;
};

struct SourceSpec {
  int64_t speaker_id = 0;
  double azimuth_deg = 0;
  double distance_m = 1;
  double level_db = 0;
};

// Every component of a rendered scene after the shared headroom gain, so
// that mixture == sum(images) + noise holds exactly.
struct Scene {
  Polarity polarity = Polarity::kPositive;
  std::vector<SourceSpec> sources;
  std::vector<Tensor<double>> images;  // [C, N] per source, with reverb
  std::vector<Tensor<double>> direct;  // [N] direct path at microphone 0
  Tensor<double> noise;                // [C, N]
  Tensor<double> mixture;              // [C, N]
  Tensor<double> target;               // [N], all zero for negatives
  Tensor<double> enrollment;           // [E]
  int64_t enroll_speaker = 0;
  double snr_db = 0;
  double t60_s = 0;  // 0 without reverberation
  double headroom_gain = 1;
  uint64_t seed = 0;
};

struct TrainingPair {
  std::string id;
  Polarity polarity = Polarity::kPositive;
  Tensor<float> mixture;     // [C, N]
  Tensor<float> target;      // [N]
  Tensor<float> enrollment;  // [E]
  int64_t speaker_id = 0;    // enrollment speaker
  uint64_t seed = 0;
  double snr_db = 0;
};

// Fully determined by its arguments. Positives place the enrollment
// speaker as source 0; negatives draw the enrollment speaker from `pool`
// but keep it out of the mixture. The pool must hold more than n_sources
// speakers.
Scene MakeScene(const SceneConfig& config, Polarity polarity,
                const std::vector<int64_t>& pool, uint64_t seed);

TrainingPair MakePair(const SceneConfig& config, Polarity polarity,
                      const std::vector<int64_t>& pool, uint64_t seed);
TrainingPair ToPair(const Scene& scene, std::string id);

// Negative positions among n pairs: floor(n * fraction) of them, spread
// evenly starting at index 0 (index i is negative iff i * k mod n < k).
std::vector<bool> NegativeMask(int64_t n, double fraction);

}  // namespace promptse

#endif  // PROMPTSE_SCENESIM_SCENE_H_
