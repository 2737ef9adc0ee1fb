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

#include "promptse/dsp/wav.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "promptse/error.h"
#include "promptse/io.h"

namespace promptse {
namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

template <typename U>
U Load(const uint8_t* p) {
  U v;
  std::memcpy(&v, p, sizeof(U));
  return v;
}

template <typename U>
void Store(std::vector<uint8_t>& out, U v) {
  uint8_t b[sizeof(U)];
  std::memcpy(b, &v, sizeof(U));
  out.insert(out.end(), b, b + sizeof(U));
}

void StoreTag(std::vector<uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

Waveform ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& what) -> void {
    throw DataError(path + ": " + what);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file");
  }
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  size_t data_size = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* chunk = bytes.data() + pos;
    const uint32_t size = Load<uint32_t>(chunk + 4);
    const size_t body = pos + 8;
    const size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || size > avail) fail("truncated fmt chunk");
      format = Load<uint16_t>(chunk + 8);
      channels = Load<uint16_t>(chunk + 10);
      rate = Load<uint32_t>(chunk + 12);
      bits = Load<uint16_t>(chunk + 22);
      if (format == kFormatExtensible) {
        if (size < 40) fail("truncated extensible fmt chunk");
        format = Load<uint16_t>(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = std::min<size_t>(size, avail);
    }
    pos = body + size + (size & 1);
  }
  if (channels == 0 || rate == 0) fail("missing or invalid fmt chunk");
  if (data == nullptr) fail("missing data chunk");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    fail("unsupported encoding (format " + std::to_string(format) + ", " +
         std::to_string(bits) + " bits); expected 16-bit PCM or 32-bit float");
  }
  const size_t frame_bytes = size_t(channels) * (bits / 8);
  const int64_t n = static_cast<int64_t>(data_size / frame_bytes);
  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples = Tensor<float>({channels, n});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t c = 0; c < channels; ++c) {
      const uint8_t* p = data + i * frame_bytes + c * (bits / 8);
      w.samples[c * n + i] =
          pcm16 ? Load<int16_t>(p) / 32768.0f : Load<float>(p);
    }
  }
  return w;
}

Waveform ReadWav(const std::string& path, int expected_rate) {
  Waveform w = ReadWav(path);
  if (w.sample_rate != expected_rate) {
    throw DataError(path + ": sample rate " + std::to_string(w.sample_rate) +
                    " Hz, expected " + std::to_string(expected_rate) + " Hz");
  }
  return w;
}

void WriteWav(const std::string& path, const Waveform& wave, WavFormat format) {
  if (wave.samples.rank() != 2 || wave.channels() == 0) {
    throw ShapeError("write_wav: expected [channels, samples], got " +
                     ShapeString(wave.samples.shape()));
  }
  if (wave.sample_rate <= 0) throw DataError("write_wav: invalid sample rate");
  const uint16_t channels = static_cast<uint16_t>(wave.channels());
  const int64_t n = wave.length();
  const uint16_t bits = format == WavFormat::kPcm16 ? 16 : 32;
  const uint32_t block = channels * (bits / 8);
  const uint32_t data_size = static_cast<uint32_t>(n * block);

  std::vector<uint8_t> out;
  out.reserve(44 + data_size);
  StoreTag(out, "RIFF");
  Store<uint32_t>(out, 36 + data_size);
  StoreTag(out, "WAVE");
  StoreTag(out, "fmt ");
  Store<uint32_t>(out, 16);
  Store<uint16_t>(out, format == WavFormat::kPcm16 ? kFormatPcm : kFormatFloat);
  Store<uint16_t>(out, channels);
  Store<uint32_t>(out, static_cast<uint32_t>(wave.sample_rate));
  Store<uint32_t>(out, static_cast<uint32_t>(wave.sample_rate) * block);
  Store<uint16_t>(out, static_cast<uint16_t>(block));
  Store<uint16_t>(out, bits);
  StoreTag(out, "data");
  Store<uint32_t>(out, data_size);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t c = 0; c < channels; ++c) {
      const float v = wave.samples[c * n + i];
      if (format == WavFormat::kPcm16) {
        const float clipped = std::clamp(v, -1.0f, 1.0f);
        Store<int16_t>(out, static_cast<int16_t>(
                                std::clamp(std::lround(clipped * 32768.0f),
                                           -32768L, 32767L)));
      } else {
        Store<float>(out, v);
      }
    }
  }

  WriteFileAtomic(path, out.data(), out.size());
}

}  // namespace promptse
