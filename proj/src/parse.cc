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

#include "promptse/parse.h"

#include <charconv>
#include <cmath>
#include <sstream>

#include "fmt/format.h"
#include "promptse/error.h"

namespace promptse {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void Bad(const std::string& key, const std::string& value,
                      const char* what) {
  throw ConfigError(fmt::format("{}: '{}' is not {}", key, value, what));
}

}  // namespace

int64_t ParseInt(const std::string& key, const std::string& value) {
  const std::string v = Trim(value);
  int64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || end != v.data() + v.size()) {
    Bad(key, value, "an integer");
  }
  return out;
}

double ParseDouble(const std::string& key, const std::string& value) {
  const std::string v = Trim(value);
  double out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || end != v.data() + v.size() ||
      !std::isfinite(out)) {
    Bad(key, value, "a finite number");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& value) {
  const std::string v = Trim(value);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  Bad(key, value, "a boolean");
}

std::string FormatDouble(double value) { return fmt::format("{}", value); }

KeyValues ParseKeyValueText(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("line {}: expected key=value, got '{}'", line_no, t));
    }
    const std::string key = Trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", line_no));
    if (!out.emplace(key, Trim(t.substr(eq + 1))).second) {
      throw ConfigError(fmt::format("line {}: duplicate key '{}'", line_no, key));
    }
  }
  return out;
}

std::string FormatKeyValueText(const KeyValues& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + "=" + v + "\n";
  return out;
}

}  // namespace promptse
