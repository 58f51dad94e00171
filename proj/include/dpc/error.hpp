// Copyright 2026 The DPC Authors.
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

#ifndef DPC_ERROR_HPP_
#define DPC_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dpc {

enum class ErrorKind {
  kParameter,   // invalid argument or configuration value
  kStructural,  // shape / dimension mismatch
  kIngestion,   // malformed input file
  kIo,          // file system failure
  kNumeric,     // non-finite value in a computation
  kTraining,    // optimisation diverged
};

const char* ErrorKindName(ErrorKind kind);

// All library failures are reported through this exception; the C API maps
// `kind()` onto status codes.
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

}  // namespace dpc

#endif  // DPC_ERROR_HPP_
