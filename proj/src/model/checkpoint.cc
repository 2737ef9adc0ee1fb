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

#include "promptse/model/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "fmt/format.h"
#include "promptse/error.h"
#include "promptse/io.h"

namespace promptse {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'P', 'T', 'S', 'E', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kFloat32 = 0;
constexpr uint32_t kMaxRank = 8;

uint64_t Fnv1a(const uint8_t* p, size_t n) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename U>
  void Put(U v) {
    uint8_t b[sizeof(U)];
    std::memcpy(b, &v, sizeof(U));
    bytes_.insert(bytes_.end(), b, b + sizeof(U));
  }
  void PutBytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<uint8_t>& bytes, size_t end, std::string path)
      : bytes_(bytes), end_(end), path_(std::move(path)) {}

  template <typename U>
  U Get() {
    U v;
    std::memcpy(&v, Take(sizeof(U)), sizeof(U));
    return v;
  }
  const uint8_t* Take(size_t n) {
    if (n > end_ - pos_) throw DataError(path_ + ": truncated checkpoint");
    const uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  size_t remaining() const { return end_ - pos_; }

 private:
  const std::vector<uint8_t>& bytes_;
  size_t end_;
  size_t pos_ = 0;
  std::string path_;
};

}  // namespace

void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint) {
  Writer w;
  w.PutBytes(kMagic, sizeof(kMagic));
  w.Put<uint32_t>(kVersion);
  const std::string header = FormatKeyValueText(checkpoint.header);
  w.Put<uint64_t>(header.size());
  w.PutBytes(header.data(), header.size());
  w.Put<uint64_t>(checkpoint.tensors.size());
  for (const auto& [name, t] : checkpoint.tensors) {
    w.Put<uint32_t>(static_cast<uint32_t>(name.size()));
    w.PutBytes(name.data(), name.size());
    w.Put<uint8_t>(kFloat32);
    w.Put<uint32_t>(static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) w.Put<uint64_t>(static_cast<uint64_t>(d));
    w.PutBytes(t.data(), t.size() * sizeof(float));
  }
  w.Put<uint64_t>(Fnv1a(w.bytes().data(), w.bytes().size()));

  WriteFileAtomic(path, w.bytes().data(), w.bytes().size());
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  const std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + 4 + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path + ": not a checkpoint file");
  }
  const size_t body = bytes.size() - 8;
  uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (stored != Fnv1a(bytes.data(), body)) {
    throw DataError(path + ": checksum mismatch (truncated or corrupted)");
  }
  Reader r(bytes, body, path);
  r.Take(sizeof(kMagic));
  const uint32_t version = r.Get<uint32_t>();
  if (version != kVersion) {
    throw DataError(fmt::format("{}: unsupported checkpoint version {}", path, version));
  }
  Checkpoint ck;
  const uint64_t header_len = r.Get<uint64_t>();
  if (header_len > r.remaining()) throw DataError(path + ": truncated checkpoint");
  const uint8_t* h = r.Take(header_len);
  try {
    ck.header = ParseKeyValueText(std::string(reinterpret_cast<const char*>(h), header_len));
  } catch (const ConfigError& e) {
    throw DataError(path + ": malformed header: " + e.what());
  }
  const uint64_t count = r.Get<uint64_t>();
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.Get<uint32_t>();
    const uint8_t* np = r.Take(name_len);
    std::string name(reinterpret_cast<const char*>(np), name_len);
    const uint8_t dtype = r.Get<uint8_t>();
    if (dtype != kFloat32) {
      throw DataError(fmt::format("{}: tensor {} has unknown dtype tag {}", path, name, dtype));
    }
    const uint32_t rank = r.Get<uint32_t>();
    if (rank > kMaxRank) throw DataError(fmt::format("{}: tensor {} rank {}", path, name, rank));
    Shape shape(rank);
    uint64_t elements = 1;
    for (uint32_t a = 0; a < rank; ++a) {
      const uint64_t d = r.Get<uint64_t>();
      if (d > r.remaining()) throw DataError(path + ": truncated checkpoint");
      shape[a] = static_cast<int64_t>(d);
      elements *= d;
    }
    if (elements > r.remaining() / sizeof(float)) {
      throw DataError(path + ": truncated checkpoint");
    }
    Tensor<float> t(shape);
    std::memcpy(t.data(), r.Take(elements * sizeof(float)), elements * sizeof(float));
    if (!ck.tensors.emplace(std::move(name), std::move(t)).second) {
      throw DataError(path + ": duplicate tensor name");
    }
  }
  if (r.remaining() != 0) throw DataError(path + ": trailing bytes in checkpoint");
  return ck;
}

}  // namespace promptse
