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

#include "promptse/scenesim/spatial.h"

#include <array>
#include <cmath>
#include <numbers>

#include "promptse/error.h"
#include "promptse/numerics/random.h"

namespace promptse {
namespace {

constexpr int kHalf = kFractionalDelayTaps / 2;

double Sinc(double u) {
  if (u == 0.0) return 1.0;
  const double a = std::numbers::pi * u;
  return std::sin(a) / a;
}

// Taps h[k] for k = -kHalf..kHalf such that y[n] = sum_k h[k] x[n - k - shift].
std::array<double, kFractionalDelayTaps> DelayKernel(double frac) {
  std::array<double, kFractionalDelayTaps> h{};
  double sum = 0;
  for (int k = -kHalf; k <= kHalf; ++k) {
    const double u = double(k) - frac;
    const double w = std::abs(u) < kHalf + 1
                         ? 0.5 + 0.5 * std::cos(std::numbers::pi * u / (kHalf + 1))
                         : 0.0;
    h[k + kHalf] = Sinc(u) * w;
    sum += h[k + kHalf];
  }
  for (double& v : h) v /= sum;
  return h;
}

// out[n] += gain * x[n - delay] over one channel of length n.
void AddDelayed(const double* x, int64_t n, double delay, double gain, double* out) {
  const double whole = std::floor(delay);
  const double frac = delay - whole;
  const int64_t shift = static_cast<int64_t>(whole);
  if (frac == 0.0) {
    for (int64_t i = std::max<int64_t>(0, shift); i < n && i - shift < n; ++i) {
      out[i] += gain * x[i - shift];
    }
    return;
  }
  const auto h = DelayKernel(frac);
  for (int64_t i = 0; i < n; ++i) {
    double s = 0;
    for (int k = -kHalf; k <= kHalf; ++k) {
      const int64_t j = i - k - shift;
      if (j >= 0 && j < n) s += h[k + kHalf] * x[j];
    }
    out[i] += gain * s;
  }
}

}  // namespace

void ArrayGeometry::Validate() const {
  if (mic_count < 1) throw ConfigError("scene.mic_count must be at least 1");
  if (!(spacing_m > 0)) throw ConfigError("scene.mic_spacing must be positive");
  if (!(speed_of_sound > 0)) throw ConfigError("scene.speed_of_sound must be positive");
}

double ArrayGeometry::DelaySamples(int64_t mic, double azimuth_deg, int sample_rate) const {
  const double rad = azimuth_deg * std::numbers::pi / 180.0;
  return double(mic) * spacing_m * std::cos(rad) / speed_of_sound * sample_rate;
}

Tensor<double> FractionalDelay(const Tensor<double>& x, double delay) {
  if (x.rank() != 1) throw ShapeError("fractional delay expects a mono signal");
  Tensor<double> y(x.shape());
  AddDelayed(x.data(), x.size(), delay, 1.0, y.data());
  return y;
}

Tensor<double> Spatialize(const Tensor<double>& source, const ArrayGeometry& array,
                          double azimuth_deg, double distance_m, int sample_rate,
                          const std::optional<ReverbSpec>& reverb) {
  array.Validate();
  if (source.rank() != 1) throw ShapeError("spatialize expects a mono source");
  if (!(distance_m > 0)) throw ConfigError("source distance must be positive");
  const int64_t n = source.size(), c = array.mic_count;
  Tensor<double> out({c, n});
  const double direct = 1.0 / distance_m;
  for (int64_t m = 0; m < c; ++m) {
    AddDelayed(source.data(), n, array.DelaySamples(m, azimuth_deg, sample_rate), direct,
               out.data() + m * n);
  }
  if (!reverb) return out;
  if (!(reverb->t60_s > 0) || reverb->reflections < 0) {
    throw ConfigError("reverberation needs t60 > 0 and a non-negative reflection count");
  }
  Rng rng(reverb->seed);
  for (int r = 0; r < reverb->reflections; ++r) {
    const double lag_s = rng.Uniform(0.0025, 0.8 * reverb->t60_s);
    const double from = rng.Uniform(0.0, 180.0);
    const double sign = rng.Uniform() < 0.5 ? -1.0 : 1.0;
    const double gain = sign * direct * rng.Uniform(0.3, 0.8) *
                        std::pow(10.0, -3.0 * lag_s / reverb->t60_s);
    for (int64_t m = 0; m < c; ++m) {
      AddDelayed(source.data(), n,
                 lag_s * sample_rate + array.DelaySamples(m, from, sample_rate), gain,
                 out.data() + m * n);
    }
  }
  return out;
}

}  // namespace promptse
