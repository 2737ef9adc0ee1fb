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

#ifndef PROMPTSE_IO_H_
#define PROMPTSE_IO_H_

#include <cstddef>
#include <string>
#include <string_view>

namespace promptse {

// Writes `bytes` to `path` + ".tmp" and renames it over `path`, so readers
// never see a partial file. Throws DataError on failure.
void WriteFileAtomic(const std::string& path, std::string_view bytes);
void WriteFileAtomic(const std::string& path, const void* data, size_t size);

// Whole-file read. Throws DataError when the file cannot be opened.
std::string ReadFile(const std::string& path);

}  // namespace promptse

#endif  // PROMPTSE_IO_H_
