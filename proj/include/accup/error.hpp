/*
 * Copyright 2026 The accup Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef ACCUP_ERROR_HPP_
#define ACCUP_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace accup {

// Broad failure classes. Each maps onto one C API status code and CLI exit
// code (see accup.h).
enum class ErrorKind {
  kConformance,    // tensor/batch shapes do not fit together
  kNumericDomain,  // NaN/Inf produced, log of non-positive, ...
  kConfig,         // invalid hyperparameters or experiment configuration
  kContract,       // API misuse (non-scalar loss, empty stream, ...)
  kFormat,         // bad magic/version, truncated or malformed file
  kDataShape,      // file content disagrees with declared dataset shape
  kLabelRange,     // label outside 0..C-1
  kIo,             // file cannot be opened/written
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void Require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace accup

#endif  // ACCUP_ERROR_HPP_
