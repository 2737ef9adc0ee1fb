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

// Strict scalar parsing for flat `key=value` configuration text. Every
// function throws ConfigError naming the key on malformed input.

#ifndef PROMPTSE_PARSE_H_
#define PROMPTSE_PARSE_H_

#include <cstdint>
#include <map>
#include <string>

namespace promptse {

using KeyValues = std::map<std::string, std::string>;

int64_t ParseInt(const std::string& key, const std::string& value);
double ParseDouble(const std::string& key, const std::string& value);
bool ParseBool(const std::string& key, const std::string& value);

// Shortest text that parses back to the same double.
std::string FormatDouble(double value);

// One `key=value` pair per line; blank lines and lines starting with '#'
// are skipped. Duplicate keys and lines without '=' are errors.
KeyValues ParseKeyValueText(const std::string& text);
std::string FormatKeyValueText(const KeyValues& values);

}  // namespace promptse

#endif  // PROMPTSE_PARSE_H_
