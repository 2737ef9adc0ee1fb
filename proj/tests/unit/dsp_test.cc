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

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>

#include "gtest/gtest.h"
#include "promptse/dsp/features.h"
#include "promptse/dsp/stft.h"
#include "promptse/dsp/wav.h"
#include "promptse/numerics/grad_check.h"
#include "promptse/numerics/ops.h"
#include "test_util.h"

namespace promptse {
namespace {

using testing::Inner;
using testing::RandomTensor;
using V = Var<double>;

const StftConfig kDefault = StftConfig::ForSampleRate(8000);
const StftConfig kTiny = StftConfig::ForSampleRate(1000);

// Frame t of channel 0 evaluated with a direct O(W^2) DFT.
std::vector<std::complex<double>> NaiveFrameDft(const Tensor<double>& x,
                                                const StftConfig& cfg, int64_t t) {
  const int64_t w = cfg.window_length, n = x.dim(1);
  const std::vector<double> win = SqrtHannWindow(w);
  std::vector<std::complex<double>> out(cfg.bins());
  for (int64_t k = 0; k < cfg.bins(); ++k) {
    for (int64_t m = 0; m < w; ++m) {
      int64_t i = t * cfg.hop_length + m - cfg.pad();
      if (i < 0) i = -i;
      if (i >= n) i = 2 * n - 2 - i;
      out[k] += x[i] * win[m] *
                std::polar(1.0, -2.0 * std::numbers::pi * k * m / double(w));
    }
  }
  return out;
}

TEST(StftConfigTest, DefaultFraming) {
  EXPECT_EQ(kDefault.window_length, 128);
  EXPECT_EQ(kDefault.hop_length, 64);
  EXPECT_EQ(kDefault.bins(), 65);
  EXPECT_EQ(kTiny.window_length, 16);
  EXPECT_EQ(kTiny.bins(), 9);
}

TEST(StftConfigTest, RejectsInvalid) {
  EXPECT_THROW(StftConfig::ForSampleRate(8000, 16.0, 6.0), ConfigError);
  EXPECT_THROW(StftConfig::ForSampleRate(8100, 16.1, 8.0), ConfigError);
  EXPECT_THROW(StftConfig::ForSampleRate(0), ConfigError);
}

TEST(SqrtHannTest, SquaresOverlapAddToOne) {
  const std::vector<double> w = SqrtHannWindow(128);
  for (int n = 0; n < 64; ++n) EXPECT_NEAR(w[n] * w[n] + w[n + 64] * w[n + 64], 1.0, 1e-15);
}

TEST(PrependEnrollmentTest, LengthsAndFrames) {
  std::mt19937_64 rng(1);
  Tensor<double> e = RandomTensor({32000}, rng), y = RandomTensor({2, 32000}, rng);
  PromptedMixture<double> p = PrependEnrollment(e, y, kDefault);
  EXPECT_EQ(p.signal.shape(), (Shape{2, 64000}));
  EXPECT_EQ(p.enroll_frames, 500);
  EXPECT_EQ(p.mix_frames, 500);
  for (int64_t i = 0; i < 32000; ++i) {
    ASSERT_EQ(p.signal[i], e[i]);
    ASSERT_EQ(p.signal[64000 + i], e[i]);
    ASSERT_EQ(p.signal[32000 + i], y[i]);
    ASSERT_EQ(p.signal[64000 + 32000 + i], y[32000 + i]);
  }
}

TEST(PrependEnrollmentTest, FrameCountsAdd) {
  std::mt19937_64 rng(2);
  for (int64_t n : {640, 700, 1000, 129}) {
    Tensor<double> e = RandomTensor({320}, rng), y = RandomTensor({3, n}, rng);
    PromptedMixture<double> p = PrependEnrollment(e, y, kDefault);
    Tensor<double> spec = Stft(p.signal, kDefault);
    EXPECT_EQ(spec.dim(2), p.enroll_frames + p.mix_frames) << n;
  }
}

TEST(PrependEnrollmentTest, MisalignedEnrollmentIsError) {
  Tensor<double> e({100}), y({1, 640});
  EXPECT_THROW(PrependEnrollment(e, y, kDefault), DataError);
  EXPECT_THROW(PrependEnrollment(Tensor<double>({0}), y, kDefault), DataError);
}

TEST(TrimToHopTest, DropsTail) {
  Tensor<double> e({1000});
  EXPECT_EQ(TrimToHop(e, 64).dim(0), 960);
  EXPECT_EQ(TrimToHop(Tensor<double>({640}), 64).dim(0), 640);
  EXPECT_THROW(TrimToHop(Tensor<double>({63}), 64), DataError);
}

TEST(StftTest, ShapeAndZeroSignal) {
  Tensor<double> spec = Stft(Tensor<double>({2, 640}), kDefault);
  EXPECT_EQ(spec.shape(), (Shape{2, 2, 10, 65}));
  for (double v : spec.values()) EXPECT_EQ(v, 0.0);
}

TEST(StftTest, ShortSignalIsError) {
  EXPECT_THROW(Stft(Tensor<double>({1, 127}), kDefault), DataError);
}

TEST(StftTest, MatchesDirectDft) {
  std::mt19937_64 rng(3);
  Tensor<double> x = RandomTensor({1, 700}, rng);
  Tensor<double> spec = Stft(x, kDefault);
  const int64_t frames = spec.dim(2);
  for (int64_t t : {int64_t{0}, int64_t{1}, int64_t{5}, frames - 1}) {
    auto ref = NaiveFrameDft(x, kDefault, t);
    for (int64_t k = 0; k < 65; ++k) {
      EXPECT_NEAR(spec[t * 65 + k], ref[k].real(), 1e-10);
      EXPECT_NEAR(spec[frames * 65 + t * 65 + k], ref[k].imag(), 1e-10);
    }
  }
}

// A sqrt-Hann window leaks about a fifth of a bin-centred tone's energy into
// the two neighbours on each side; the peak stays at the tone's bin.
TEST(StftTest, CosineConcentratesAtItsBin) {
  Tensor<double> x({1, 1280});
  for (int64_t n = 0; n < 1280; ++n) x[n] = std::cos(2 * std::numbers::pi * 6 * n / 128.0);
  Tensor<double> spec = Stft(x, kDefault);
  const int64_t frames = spec.dim(2);
  for (int64_t t = 1; t + 1 < frames; ++t) {
    std::vector<double> e(65);
    double total = 0;
    for (int64_t k = 0; k < 65; ++k) {
      const double re = spec[t * 65 + k], im = spec[(frames + t) * 65 + k];
      e[k] = re * re + im * im;
      total += e[k];
    }
    EXPECT_EQ(std::max_element(e.begin(), e.end()) - e.begin(), 6);
    EXPECT_NEAR(e[6] / total, 0.8081, 1e-3);
    EXPECT_GE((e[4] + e[5] + e[6] + e[7] + e[8]) / total, 0.99);
  }
}

TEST(IstftTest, PerfectReconstruction) {
  std::mt19937_64 rng(4);
  for (int64_t n : {384, 640, 1001, 4000}) {
    for (int trial = 0; trial < 3; ++trial) {
      Tensor<double> x = RandomTensor({1, n}, rng);
      Tensor<double> spec = Stft(x, kDefault);
      Tensor<double> one({2, spec.dim(2), 65},
                         std::vector<double>(spec.data(), spec.data() + spec.size()));
      Tensor<double> y = Istft(one, kDefault, n);
      double err = 0;
      for (int64_t i = 0; i < n; ++i) err = std::max(err, std::abs(y[i] - x[i]));
      EXPECT_LT(err / MaxAbs(x), 1e-6) << "n=" << n;
    }
  }
}

TEST(IstftTest, FloatReconstruction) {
  std::mt19937_64 rng(5);
  Tensor<float> x = RandomTensor({1, 2048}, rng).Cast<float>();
  Tensor<float> spec = Stft(x, kDefault).Reshaped({2, 32, 65});
  Tensor<float> y = Istft(spec, kDefault, 2048);
  double err = 0;
  // Skip the last hop, where the synthesis envelope falls towards zero and
  // amplifies float rounding.
  for (int64_t i = 0; i < 2048 - 64; ++i) err = std::max(err, double(std::abs(y[i] - x[i])));
  EXPECT_LT(err, 1e-5);
}

TEST(IstftTest, ZeroAndLinear) {
  Tensor<double> z = Istft(Tensor<double>({2, 10, 65}), kDefault, 640);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
  std::mt19937_64 rng(6);
  Tensor<double> s1 = RandomTensor({2, 10, 65}, rng), s2 = RandomTensor({2, 10, 65}, rng);
  Tensor<double> mix({2, 10, 65});
  for (int64_t i = 0; i < mix.size(); ++i) mix[i] = 0.3 * s1[i] - 1.7 * s2[i];
  Tensor<double> a = Istft(s1, kDefault, 640), b = Istft(s2, kDefault, 640);
  Tensor<double> c = Istft(mix, kDefault, 640);
  const double scale = std::max(MaxAbs(a), MaxAbs(b));
  for (int64_t i = 0; i < 640; ++i) {
    EXPECT_NEAR(c[i], 0.3 * a[i] - 1.7 * b[i], 1e-6 * scale);
  }
}

TEST(IstftTest, BinMismatchIsShapeError) {
  EXPECT_THROW(Istft(Tensor<double>({2, 10, 64}), kDefault, 640), ShapeError);
  EXPECT_THROW(Istft(Tensor<double>({1, 10, 65}), kDefault, 640), ShapeError);
}

TEST(IstftTest, OutputLengthIsHonoured) {
  Tensor<double> y = Istft(Tensor<double>::Filled({2, 10, 65}, 0.1), kDefault, 700);
  EXPECT_EQ(y.dim(0), 700);
  for (int64_t i = 640; i < 700; ++i) EXPECT_EQ(y[i], 0.0);
}

TEST(SpectralEnergyTest, MatchesWaveformEnergy) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    Tensor<double> x = RandomTensor({2, 1280}, rng);
    for (int64_t c = 0; c < 2; ++c) {
      for (int64_t i = 0; i < 128; ++i) {
        x[c * 1280 + i] = 0;
        x[c * 1280 + 1279 - i] = 0;
      }
    }
    const double energy = Inner(x, x);
    EXPECT_NEAR(SpectralEnergy(Stft(x, kDefault), kDefault) / energy, 1.0, 1e-5);
  }
}

TEST(StackRiMagTest, MapCounts) {
  for (int64_t c : {1, 2, 4}) {
    Tensor<double> f = StackRiMag(Stft(Tensor<double>({c, 256}), kDefault));
    EXPECT_EQ(f.dim(0), 2 * c + 1);
  }
}

TEST(StackRiMagTest, ConstantSignalDcBin) {
  Tensor<double> x = Tensor<double>::Filled({2, 512}, -0.25);
  Tensor<double> spec = Stft(x, kDefault);
  Tensor<double> f = StackRiMag(spec, 1);
  const int64_t plane = spec.dim(2) * 65;
  for (int64_t t = 0; t < spec.dim(2); ++t) {
    const int64_t i = t * 65;
    EXPECT_NEAR(f[2 * plane + i], 0.0, 1e-12);
    EXPECT_NEAR(f[4 * plane + i], std::abs(f[plane + i]), 1e-12);
  }
}

TEST(StackRiMagTest, InvertibleAndNonNegative) {
  std::mt19937_64 rng(8);
  Tensor<double> spec = Stft(RandomTensor({3, 640}, rng), kDefault);
  Tensor<double> f = StackRiMag(spec, 2);
  for (int64_t i = 0; i < spec.size(); ++i) ASSERT_EQ(f[i], spec[i]);
  const int64_t plane = spec.dim(2) * 65;
  for (int64_t i = 0; i < plane; ++i) {
    const double re = spec[2 * plane + i], im = spec[5 * plane + i];
    ASSERT_GE(f[6 * plane + i], 0.0);
    ASSERT_NEAR(f[6 * plane + i], std::sqrt(re * re + im * im), 1e-12);
  }
  EXPECT_THROW(StackRiMag(spec, 3), IndexError);
  EXPECT_THROW(StackRiMag(spec, -1), IndexError);
}

TEST(StackRiMagTest, VarMatchesTensor) {
  std::mt19937_64 rng(9);
  Tensor<double> spec = Stft(RandomTensor({2, 300}, rng), kDefault);
  Tape<double> tape;
  V f = ops::StackRiMag(tape.Constant(spec), 1);
  Tensor<double> expected = StackRiMag(spec, 1);
  ASSERT_EQ(f.shape(), expected.shape());
  for (int64_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(f.value()[i], expected[i], 1e-15);
}

TEST(DspGradTest, StftGradCheck) {
  std::mt19937_64 rng(10);
  for (int64_t n : {16, 40, 53}) {
    GradCheckReport r = GradCheck(
        [](Tape<double>&, const std::vector<V>& in) {
          return ops::Dot(ops::Stft(in[0], kTiny), in[1]);
        },
        {RandomTensor({2, n}, rng),
         RandomTensor({2, 2, kTiny.NumFrames(n), kTiny.bins()}, rng)});
    EXPECT_TRUE(r.pass) << r.message;
  }
}

TEST(DspGradTest, IstftGradCheck) {
  std::mt19937_64 rng(11);
  for (int64_t frames : {2, 4, 7}) {
    const int64_t n = frames * kTiny.hop_length - 3;
    GradCheckReport r = GradCheck(
        [n](Tape<double>&, const std::vector<V>& in) {
          return ops::Dot(ops::Istft(in[0], kTiny, n), in[1]);
        },
        {RandomTensor({2, frames, kTiny.bins()}, rng), RandomTensor({n}, rng)});
    EXPECT_TRUE(r.pass) << r.message;
  }
}

TEST(DspGradTest, StackRiMagGradCheck) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 3; ++trial) {
    GradCheckReport r = GradCheck(
        [](Tape<double>&, const std::vector<V>& in) {
          return ops::Dot(ops::StackRiMag(in[0], 1), in[1]);
        },
        {RandomTensor({2, 2, 3, 4}, rng), RandomTensor({5, 3, 4}, rng)});
    EXPECT_TRUE(r.pass) << r.message;
  }
}

// istft(stft(.)) is the identity, so its vector-Jacobian product is too.
TEST(DspGradTest, RoundTripGradientIsIdentity) {
  std::mt19937_64 rng(13);
  Tensor<double> x = RandomTensor({1, 96}, rng), y = RandomTensor({96}, rng);
  Tape<double> tape;
  V xv = tape.Variable(x);
  V spec = ops::Reshape(ops::Stft(xv, kTiny), {2, 12, kTiny.bins()});
  tape.Backward(ops::Dot(ops::Istft(spec, kTiny, 96), tape.Constant(y)));
  Tensor<double> g = tape.Grad(xv);
  for (int64_t i = 0; i < 96; ++i) EXPECT_NEAR(g[i], y[i], 1e-9);
}

class WavTest : public ::testing::Test {
 protected:
  std::string Path(const std::string& name) { return ::testing::TempDir() + name; }
};

TEST_F(WavTest, FloatRoundTripIsExact) {
  std::mt19937_64 rng(14);
  Waveform w;
  w.sample_rate = 8000;
  w.samples = RandomTensor({3, 257}, rng).Cast<float>();
  WriteWav(Path("f32.wav"), w, WavFormat::kFloat32);
  Waveform r = ReadWav(Path("f32.wav"), 8000);
  ASSERT_EQ(r.samples.shape(), w.samples.shape());
  for (int64_t i = 0; i < w.samples.size(); ++i) EXPECT_EQ(r.samples[i], w.samples[i]);
}

TEST_F(WavTest, Pcm16RoundTripWithinQuantisation) {
  std::mt19937_64 rng(15);
  Waveform w;
  w.sample_rate = 16000;
  w.samples = RandomTensor({1, 500}, rng, -0.99, 0.99).Cast<float>();
  w.samples[0] = 1.5f;  // clipped on write
  WriteWav(Path("pcm.wav"), w, WavFormat::kPcm16);
  Waveform r = ReadWav(Path("pcm.wav"));
  EXPECT_EQ(r.sample_rate, 16000);
  ASSERT_EQ(r.samples.shape(), w.samples.shape());
  EXPECT_NEAR(r.samples[0], 32767.0f / 32768.0f, 1e-7);
  for (int64_t i = 1; i < 500; ++i) EXPECT_NEAR(r.samples[i], w.samples[i], 1.0 / 32768.0);
}

TEST_F(WavTest, RateMismatchIsError) {
  Waveform w;
  w.sample_rate = 16000;
  w.samples = Tensor<float>({1, 10});
  WriteWav(Path("rate.wav"), w);
  EXPECT_THROW(ReadWav(Path("rate.wav"), 8000), DataError);
}

TEST_F(WavTest, MalformedFilesAreErrors) {
  EXPECT_THROW(ReadWav(Path("missing.wav")), DataError);
  {
    std::ofstream f(Path("junk.wav"), std::ios::binary);
    f << "RIFF0000WAVEnot really a wav file";
  }
  EXPECT_THROW(ReadWav(Path("junk.wav")), DataError);
}

}  // namespace
}  // namespace promptse
