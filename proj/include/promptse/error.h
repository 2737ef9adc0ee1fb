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

#ifndef PROMPTSE_ERROR_H_
#define PROMPTSE_ERROR_H_

#include <stdexcept>
#include <string>

namespace promptse {

// Root of every exception thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration (bad key, out-of-range value,
// incompatible options).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing, malformed or inconsistent input data (files, manifests, audio).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or a failed numerical check.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

}  // namespace promptse

#endif  // PROMPTSE_ERROR_H_
