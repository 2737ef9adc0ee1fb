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

// Binary container for named float32 tensors plus a text header.
//
//   "PTSECKPT"                 8-byte magic
//   u32 version                currently 1
//   u64 header length, bytes   then `key=value` lines
//   u64 tensor count
//   per tensor:
//     u32 name length, name bytes
//     u8 dtype tag (0 = float32)
//     u32 rank, u64 dims[rank]
//     raw little-endian float32 data
//   u64 FNV-1a hash of every preceding byte
//
// All integers are little-endian.

#ifndef PROMPTSE_MODEL_CHECKPOINT_H_
#define PROMPTSE_MODEL_CHECKPOINT_H_

#include <map>
#include <string>

#include "promptse/model/params.h"
#include "promptse/parse.h"

namespace promptse {

struct Checkpoint {
  KeyValues header;
  ParamMap tensors;
};

// Writes through a temporary sibling file and renames it into place.
void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint);

// Throws DataError on I/O failure, truncation, corruption or an unknown
// version or dtype.
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace promptse

#endif  // PROMPTSE_MODEL_CHECKPOINT_H_
