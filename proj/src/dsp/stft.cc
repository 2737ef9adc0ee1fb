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

#include "promptse/dsp/stft.h"

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "numerics/eigen_maps.h"
#include "promptse/error.h"

namespace promptse {
namespace {

// Padded-sample index -> source sample index under the framing convention.
std::vector<int64_t> PaddedSource(int64_t n, const StftConfig& cfg) {
  const int64_t pad = cfg.pad();
  const int64_t total = cfg.NumFrames(n) * cfg.hop_length + pad;
  std::vector<int64_t> src(total);
  for (int64_t i = 0; i < total; ++i) {
    if (i < pad) {
      src[i] = pad - i;
    } else if (i < pad + n) {
      src[i] = i - pad;
    } else {
      src[i] = n - 2 - (i - pad - n);
    }
  }
  return src;
}

// Analysis basis [W, 2F]: cos columns then -sin columns.
template <typename T>
RowMatrix<T> ForwardBasis(const StftConfig& cfg) {
  const int64_t w = cfg.window_length, f = cfg.bins();
  RowMatrix<T> a(w, 2 * f);
  for (int64_t n = 0; n < w; ++n) {
    for (int64_t k = 0; k < f; ++k) {
      const double phase = 2.0 * std::numbers::pi * double((k * n) % w) / w;
      a(n, k) = T(std::cos(phase));
      a(n, f + k) = T(-std::sin(phase));
    }
  }
  return a;
}

// One-sided inverse DFT basis [2F, W]; imaginary parts of the DC and
// Nyquist bins do not contribute.
template <typename T>
RowMatrix<T> InverseBasis(const StftConfig& cfg) {
  const int64_t w = cfg.window_length, f = cfg.bins();
  RowMatrix<T> b(2 * f, w);
  for (int64_t k = 0; k < f; ++k) {
    const double c = (k == 0 || 2 * k == w) ? 1.0 / w : 2.0 / w;
    for (int64_t n = 0; n < w; ++n) {
      const double phase = 2.0 * std::numbers::pi * double((k * n) % w) / w;
      b(k, n) = T(c * std::cos(phase));
      b(f + k, n) = (k == 0 || 2 * k == w) ? T(0) : T(-c * std::sin(phase));
    }
  }
  return b;
}

template <typename T>
std::vector<T> Window(const StftConfig& cfg) {
  std::vector<double> w = SqrtHannWindow(cfg.window_length);
  return std::vector<T>(w.begin(), w.end());
}

void CheckSignal(const Shape& s, const StftConfig& cfg) {
  if (s.size() != 2) {
    throw ShapeError("stft: expected [channels, samples], got " + ShapeString(s));
  }
  if (s[1] < cfg.window_length) {
    throw DataError("stft: signal of " + std::to_string(s[1]) +
                    " samples is shorter than one window (" +
                    std::to_string(cfg.window_length) + ")");
  }
}

template <typename T>
Tensor<T> StftForward(const Tensor<T>& x, const StftConfig& cfg) {
  const int64_t c = x.dim(0), n = x.dim(1);
  const int64_t w = cfg.window_length, hop = cfg.hop_length, f = cfg.bins();
  const int64_t frames = cfg.NumFrames(n);
  const std::vector<int64_t> src = PaddedSource(n, cfg);
  const std::vector<T> win = Window<T>(cfg);
  RowMatrix<T> framed(c * frames, w);
  for (int64_t ch = 0; ch < c; ++ch) {
    const T* xc = x.data() + ch * n;
    for (int64_t t = 0; t < frames; ++t) {
      T* row = framed.data() + (ch * frames + t) * w;
      for (int64_t k = 0; k < w; ++k) row[k] = xc[src[t * hop + k]] * win[k];
    }
  }
  RowMatrix<T> y = framed * ForwardBasis<T>(cfg);
  Tensor<T> out({2, c, frames, f});
  for (int64_t r = 0; r < 2; ++r) {
    for (int64_t row = 0; row < c * frames; ++row) {
      T* dst = out.data() + (r * c * frames + row) * f;
      const T* s = y.data() + row * 2 * f + r * f;
      std::copy(s, s + f, dst);
    }
  }
  return out;
}

// Gradient of StftForward with respect to x, given the output gradient.
template <typename T>
void StftBackward(const Tensor<T>& g, int64_t n, const StftConfig& cfg, T* gx) {
  const int64_t c = g.dim(1), frames = g.dim(2), f = g.dim(3);
  const int64_t w = cfg.window_length, hop = cfg.hop_length;
  RowMatrix<T> gy(c * frames, 2 * f);
  for (int64_t r = 0; r < 2; ++r) {
    for (int64_t row = 0; row < c * frames; ++row) {
      const T* s = g.data() + (r * c * frames + row) * f;
      std::copy(s, s + f, gy.data() + row * 2 * f + r * f);
    }
  }
  RowMatrix<T> gframes = gy * ForwardBasis<T>(cfg).transpose();
  const std::vector<int64_t> src = PaddedSource(n, cfg);
  const std::vector<T> win = Window<T>(cfg);
  for (int64_t ch = 0; ch < c; ++ch) {
    T* gc = gx + ch * n;
    for (int64_t t = 0; t < frames; ++t) {
      const T* row = gframes.data() + (ch * frames + t) * w;
      for (int64_t k = 0; k < w; ++k) gc[src[t * hop + k]] += row[k] * win[k];
    }
  }
}

// Sum of squared synthesis windows at each padded sample.
template <typename T>
std::vector<T> Envelope(int64_t frames, const StftConfig& cfg) {
  const int64_t w = cfg.window_length, hop = cfg.hop_length;
  const std::vector<T> win = Window<T>(cfg);
  std::vector<T> env(frames * hop + cfg.pad(), T(0));
  for (int64_t t = 0; t < frames; ++t) {
    for (int64_t k = 0; k < w; ++k) env[t * hop + k] += win[k] * win[k];
  }
  return env;
}

constexpr double kMinEnvelope = 1e-11;

void CheckSpectrogram(const Shape& s, const StftConfig& cfg, int64_t length) {
  if (s.size() != 3 || s[0] != 2) {
    throw ShapeError("istft: expected [2, frames, bins], got " + ShapeString(s));
  }
  if (s[2] != cfg.bins()) {
    throw ShapeError("istft: " + std::to_string(s[2]) + " bins, config expects " +
                     std::to_string(cfg.bins()));
  }
  if (length < 0) throw ShapeError("istft: negative output length");
}

template <typename T>
Tensor<T> IstftForward(const Tensor<T>& spec, const StftConfig& cfg,
                       int64_t length) {
  const int64_t frames = spec.dim(1), f = spec.dim(2);
  const int64_t w = cfg.window_length, hop = cfg.hop_length, pad = cfg.pad();
  RowMatrix<T> s(frames, 2 * f);
  for (int64_t r = 0; r < 2; ++r) {
    for (int64_t t = 0; t < frames; ++t) {
      const T* p = spec.data() + (r * frames + t) * f;
      std::copy(p, p + f, s.data() + t * 2 * f + r * f);
    }
  }
  RowMatrix<T> time = s * InverseBasis<T>(cfg);
  const std::vector<T> win = Window<T>(cfg);
  const std::vector<T> env = Envelope<T>(frames, cfg);
  std::vector<T> buf(env.size(), T(0));
  for (int64_t t = 0; t < frames; ++t) {
    const T* row = time.data() + t * w;
    for (int64_t k = 0; k < w; ++k) buf[t * hop + k] += row[k] * win[k];
  }
  Tensor<T> out({length});
  for (int64_t j = 0; j < length; ++j) {
    const int64_t i = pad + j;
    if (i < static_cast<int64_t>(buf.size()) && env[i] > kMinEnvelope) {
      out[j] = buf[i] / env[i];
    }
  }
  return out;
}

template <typename T>
void IstftBackward(const Tensor<T>& g, int64_t frames, const StftConfig& cfg,
                   T* gspec) {
  const int64_t f = cfg.bins(), w = cfg.window_length;
  const int64_t hop = cfg.hop_length, pad = cfg.pad();
  const int64_t length = g.size();
  const std::vector<T> win = Window<T>(cfg);
  const std::vector<T> env = Envelope<T>(frames, cfg);
  std::vector<T> gbuf(env.size(), T(0));
  for (int64_t j = 0; j < length; ++j) {
    const int64_t i = pad + j;
    if (i < static_cast<int64_t>(gbuf.size()) && env[i] > kMinEnvelope) {
      gbuf[i] = g[j] / env[i];
    }
  }
  RowMatrix<T> gtime(frames, w);
  for (int64_t t = 0; t < frames; ++t) {
    for (int64_t k = 0; k < w; ++k) gtime(t, k) = gbuf[t * hop + k] * win[k];
  }
  RowMatrix<T> gs = gtime * InverseBasis<T>(cfg).transpose();
  for (int64_t r = 0; r < 2; ++r) {
    for (int64_t t = 0; t < frames; ++t) {
      T* p = gspec + (r * frames + t) * f;
      const T* q = gs.data() + t * 2 * f + r * f;
      for (int64_t k = 0; k < f; ++k) p[k] += q[k];
    }
  }
}

}  // namespace

StftConfig StftConfig::ForSampleRate(int sample_rate, double window_ms,
                                     double hop_ms) {
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  const double w = sample_rate * window_ms / 1000.0;
  const double h = sample_rate * hop_ms / 1000.0;
  if (std::abs(w - std::round(w)) > 1e-9 || std::abs(h - std::round(h)) > 1e-9) {
    throw ConfigError("window/hop durations are not whole samples at " +
                      std::to_string(sample_rate) + " Hz");
  }
  StftConfig cfg;
  cfg.sample_rate = sample_rate;
  cfg.window_length = static_cast<int64_t>(std::round(w));
  cfg.hop_length = static_cast<int64_t>(std::round(h));
  cfg.Validate();
  return cfg;
}

void StftConfig::Validate() const {
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (window_length < 2 || window_length % 2 != 0) {
    throw ConfigError("window length must be even and >= 2, got " +
                      std::to_string(window_length));
  }
  if (hop_length <= 0 || hop_length > window_length ||
      window_length % hop_length != 0) {
    throw ConfigError("window length " + std::to_string(window_length) +
                      " is not a multiple of hop " + std::to_string(hop_length));
  }
}

void StftConfig::Set(const std::string& key, const std::string& value) {
  if (key == "stft.sample_rate") {
    sample_rate = static_cast<int>(ParseInt(key, value));
  } else if (key == "stft.window_length") {
    window_length = ParseInt(key, value);
  } else if (key == "stft.hop_length") {
    hop_length = ParseInt(key, value);
  } else {
    throw ConfigError("unknown key " + key);
  }
}

KeyValues StftConfig::Items() const {
  return {{"stft.sample_rate", std::to_string(sample_rate)},
          {"stft.window_length", std::to_string(window_length)},
          {"stft.hop_length", std::to_string(hop_length)}};
}

std::vector<double> SqrtHannWindow(int64_t length) {
  std::vector<double> w(length);
  for (int64_t n = 0; n < length; ++n) {
    w[n] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length));
  }
  return w;
}

template <typename T>
Tensor<T> Stft(const Tensor<T>& x, const StftConfig& config) {
  config.Validate();
  CheckSignal(x.shape(), config);
  return StftForward(x, config);
}

template <typename T>
Tensor<T> Istft(const Tensor<T>& spec, const StftConfig& config,
                int64_t length) {
  config.Validate();
  CheckSpectrogram(spec.shape(), config, length);
  return IstftForward(spec, config, length);
}

template <typename T>
double SpectralEnergy(const Tensor<T>& spec, const StftConfig& config) {
  if (spec.rank() != 4 || spec.dim(0) != 2 || spec.dim(3) != config.bins()) {
    throw ShapeError("spectral energy: expected [2, C, T, " +
                     std::to_string(config.bins()) + "], got " +
                     ShapeString(spec.shape()));
  }
  const int64_t f = config.bins(), w = config.window_length;
  const int64_t rows = spec.size() / f;
  double e = 0;
  for (int64_t row = 0; row < rows; ++row) {
    const T* p = spec.data() + row * f;
    for (int64_t k = 0; k < f; ++k) {
      const double weight = (k == 0 || 2 * k == w) ? 1.0 : 2.0;
      e += weight * double(p[k]) * double(p[k]);
    }
  }
  // Squared analysis windows overlap-add to W / (2 hop).
  const double gain = double(w) / (2.0 * config.hop_length);
  return e / (double(w) * gain);
}

namespace ops {

template <typename T>
Var<T> Stft(const Var<T>& x, const StftConfig& config) {
  config.Validate();
  CheckSignal(x.shape(), config);
  Tape<T>* tape = x.tape();
  const int64_t n = x.dim(1);
  return tape->Record("stft", StftForward(x.value(), config), {x},
                      [tape, x, config, n](const Tensor<T>& g, const Tensor<T>&) {
                        StftBackward(g, n, config, tape->GradRef(x).data());
                      });
}

template <typename T>
Var<T> Istft(const Var<T>& spec, const StftConfig& config, int64_t length) {
  config.Validate();
  CheckSpectrogram(spec.shape(), config, length);
  Tape<T>* tape = spec.tape();
  const int64_t frames = spec.dim(1);
  return tape->Record(
      "istft", IstftForward(spec.value(), config, length), {spec},
      [tape, spec, config, frames](const Tensor<T>& g, const Tensor<T>&) {
        IstftBackward(g, frames, config, tape->GradRef(spec).data());
      });
}

}  // namespace ops

#define PROMPTSE_INSTANTIATE_STFT(T)                                         \
  template Tensor<T> Stft(const Tensor<T>&, const StftConfig&);              \
  template Tensor<T> Istft(const Tensor<T>&, const StftConfig&, int64_t);    \
  template double SpectralEnergy(const Tensor<T>&, const StftConfig&);       \
  template Var<T> ops::Stft(const Var<T>&, const StftConfig&);               \
  template Var<T> ops::Istft(const Var<T>&, const StftConfig&, int64_t);

PROMPTSE_INSTANTIATE_STFT(float)
PROMPTSE_INSTANTIATE_STFT(double)

}  // namespace promptse
