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

#include "promptse/scenesim/scene.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "promptse/error.h"
#include "promptse/numerics/random.h"
#include "promptse/scenesim/synth.h"

namespace promptse {
namespace {

constexpr double kHeadroomPeak = 0.9;

int64_t WholeSamples(const char* key, double seconds, int rate, int64_t hop) {
  const double exact = seconds * rate;
  const int64_t n = std::llround(exact);
  if (std::abs(exact - double(n)) > 1e-6 || n <= 0 || n % hop != 0) {
    throw ConfigError(std::string(key) + " must give a positive multiple of " +
                      std::to_string(hop) + " samples, got " + std::to_string(exact));
  }
  return n;
}

double Energy(const Tensor<double>& x) {
  double e = 0;
  for (double v : x.values()) e += v * v;
  return e;
}

void Scale(Tensor<double>& x, double g) {
  for (double& v : x.values()) v *= g;
}

}  // namespace

void SceneConfig::Validate(int64_t hop_length) const {
  array.Validate();
  if (n_sources < 2) throw ConfigError("scene.n_sources must be at least 2");
  if (!(snr_min_db <= snr_max_db)) throw ConfigError("scene.snr_min_db exceeds scene.snr_max_db");
  if (reverb && !(0 < t60_min_s && t60_min_s <= t60_max_s)) {
    throw ConfigError("scene.t60 range must satisfy 0 < min <= max");
  }
  if (reflections < 0) throw ConfigError("scene.reflections must be non-negative");
  if (sample_rate <= 0) throw ConfigError("scene.sample_rate must be positive");
  if (duration_s < 1.0 || enroll_duration_s < 1.0) {
    throw ConfigError("scene durations must be at least 1 s");
  }
  WholeSamples("scene.duration_s", duration_s, sample_rate, hop_length);
  WholeSamples("scene.enroll_duration_s", enroll_duration_s, sample_rate, hop_length);
}

int64_t SceneConfig::samples() const { return std::llround(duration_s * sample_rate); }
int64_t SceneConfig::enroll_samples() const {
  return std::llround(enroll_duration_s * sample_rate);
}

void SceneConfig::Set(const std::string& key, const std::string& value) {
  if (key == "scene.n_sources") {
    n_sources = ParseInt(key, value);
  } else if (key == "scene.snr_min_db") {
    snr_min_db = ParseDouble(key, value);
  } else if (key == "scene.snr_max_db") {
    snr_max_db = ParseDouble(key, value);
  } else if (key == "scene.reverb") {
    reverb = ParseBool(key, value);
  } else if (key == "scene.t60_min_s") {
    t60_min_s = ParseDouble(key, value);
  } else if (key == "scene.t60_max_s") {
    t60_max_s = ParseDouble(key, value);
  } else if (key == "scene.reflections") {
    reflections = static_cast<int>(ParseInt(key, value));
  } else if (key == "scene.duration_s") {
    duration_s = ParseDouble(key, value);
  } else if (key == "scene.enroll_duration_s") {
    enroll_duration_s = ParseDouble(key, value);
  } else if (key == "scene.sample_rate") {
    sample_rate = static_cast<int>(ParseInt(key, value));
  } else if (key == "scene.mic_count") {
    array.mic_count = ParseInt(key, value);
  } else if (key == "scene.mic_spacing") {
    array.spacing_m = ParseDouble(key, value);
  } else if (key == "scene.speed_of_sound") {
    array.speed_of_sound = ParseDouble(key, value);
  } else {
    throw ConfigError("unknown key " + key);
  }
}

KeyValues SceneConfig::Items() const {
  return {{"scene.n_sources", std::to_string(n_sources)},
          {"scene.snr_min_db", FormatDouble(snr_min_db)},
          {"scene.snr_max_db", FormatDouble(snr_max_db)},
          {"scene.reverb", reverb ? "true" : "false"},
          {"scene.t60_min_s", FormatDouble(t60_min_s)},
          {"scene.t60_max_s", FormatDouble(t60_max_s)},
          {"scene.reflections", std::to_string(reflections)},
          {"scene.duration_s", FormatDouble(duration_s)},
          {"scene.enroll_duration_s", FormatDouble(enroll_duration_s)},
          {"scene.sample_rate", std::to_string(sample_rate)},
          {"scene.mic_count", std::to_string(array.mic_count)},
          {"scene.mic_spacing", FormatDouble(array.spacing_m)},
          {"scene.speed_of_sound", FormatDouble(array.speed_of_sound)}};
}

Scene MakeScene(const SceneConfig& config, Polarity polarity,
                const std::vector<int64_t>& pool, uint64_t seed) {
  if (static_cast<int64_t>(pool.size()) <= config.n_sources) {
    throw ConfigError("speaker pool of " + std::to_string(pool.size()) +
                      " cannot supply " + std::to_string(config.n_sources) +
                      " sources plus an absent enrollment speaker");
  }
  const int64_t n = config.samples();
  const int64_t c = config.array.mic_count;
  const int sr = config.sample_rate;
  Rng rng(seed);
  Scene scene;
  scene.polarity = polarity;
  scene.seed = seed;

  // Partial Fisher-Yates draw of n_sources + 1 distinct speakers.
  std::vector<int64_t> ids = pool;
  const int64_t picks = config.n_sources + 1;
  for (int64_t i = 0; i < picks; ++i) {
    const int64_t j = i + static_cast<int64_t>(rng.UniformInt(ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  scene.enroll_speaker = polarity == Polarity::kPositive ? ids[0] : ids[config.n_sources];

  scene.mixture = Tensor<double>({c, n});
  std::vector<uint64_t> utterance_seeds;
  for (int64_t s = 0; s < config.n_sources; ++s) {
    SourceSpec spec;
    spec.speaker_id = ids[s];
    spec.azimuth_deg = rng.Uniform(0.0, 180.0);
    spec.distance_m = rng.Uniform(1.0, 2.5);
    spec.level_db = s == 0 ? 0.0 : rng.Uniform(-5.0, 5.0);
    const uint64_t utterance_seed = rng.Next();
    utterance_seeds.push_back(utterance_seed);
    Tensor<double> dry = SynthSpeechlike(spec.speaker_id, config.duration_s, sr, utterance_seed);
    Scale(dry, std::pow(10.0, spec.level_db / 20.0));
    std::optional<ReverbSpec> reverb;
    if (config.reverb) {
      ReverbSpec r;
      r.t60_s = rng.Uniform(config.t60_min_s, config.t60_max_s);
      r.reflections = config.reflections;
      r.seed = rng.Next();
      if (s == 0) scene.t60_s = r.t60_s;
      reverb = r;
    }
    scene.images.push_back(Spatialize(dry, config.array, spec.azimuth_deg, spec.distance_m, sr, reverb));
    Tensor<double> ref = Spatialize(dry, config.array, spec.azimuth_deg, spec.distance_m, sr);
    Tensor<double> direct({n});
    std::copy(ref.data(), ref.data() + n, direct.data());
    scene.direct.push_back(std::move(direct));
    scene.sources.push_back(spec);
  }

  scene.noise = Tensor<double>({c, n});
  for (int64_t m = 0; m < c; ++m) {
    double prev = 0;
    for (int64_t i = 0; i < n; ++i) {
      prev = rng.Normal() + 0.5 * prev;
      scene.noise[m * n + i] = prev;
    }
  }
  scene.snr_db = rng.Uniform(config.snr_min_db, config.snr_max_db);
  Tensor<double> speech({c, n});
  for (const auto& img : scene.images) {
    for (int64_t i = 0; i < c * n; ++i) speech[i] += img[i];
  }
  Scale(scene.noise, std::sqrt(Energy(speech) / Energy(scene.noise) /
                               std::pow(10.0, scene.snr_db / 10.0)));

  uint64_t enroll_seed = rng.Next();
  while (std::find(utterance_seeds.begin(), utterance_seeds.end(), enroll_seed) !=
         utterance_seeds.end()) {
    enroll_seed = rng.Next();
  }
  scene.enrollment = SynthSpeechlike(scene.enroll_speaker, config.enroll_duration_s, sr, enroll_seed);

  double peak = 0;
  for (int64_t i = 0; i < c * n; ++i) peak = std::max(peak, std::abs(speech[i] + scene.noise[i]));
  scene.headroom_gain = kHeadroomPeak / peak;
  for (auto& img : scene.images) Scale(img, scene.headroom_gain);
  for (auto& d : scene.direct) Scale(d, scene.headroom_gain);
  Scale(scene.noise, scene.headroom_gain);
  for (const auto& img : scene.images) {
    for (int64_t i = 0; i < c * n; ++i) scene.mixture[i] += img[i];
  }
  for (int64_t i = 0; i < c * n; ++i) scene.mixture[i] += scene.noise[i];
  scene.target = polarity == Polarity::kPositive ? scene.direct[0] : Tensor<double>({n});
  return scene;
}

TrainingPair ToPair(const Scene& scene, std::string id) {
  TrainingPair p;
  p.id = std::move(id);
  p.polarity = scene.polarity;
  p.mixture = scene.mixture.Cast<float>();
  p.target = scene.target.Cast<float>();
  p.enrollment = scene.enrollment.Cast<float>();
  p.speaker_id = scene.enroll_speaker;
  p.seed = scene.seed;
  p.snr_db = scene.snr_db;
  return p;
}

TrainingPair MakePair(const SceneConfig& config, Polarity polarity,
                      const std::vector<int64_t>& pool, uint64_t seed) {
  return ToPair(MakeScene(config, polarity, pool, seed), "");
}

std::vector<bool> NegativeMask(int64_t n, double fraction) {
  if (!(fraction >= 0 && fraction < 1)) throw ConfigError("negative fraction must lie in [0, 1)");
  const int64_t k = static_cast<int64_t>(std::floor(double(n) * fraction + 1e-9));
  std::vector<bool> mask(n, false);
  for (int64_t i = 0; i < n; ++i) mask[i] = (i * k) % n < k;
  return mask;
}

}  // namespace promptse
