/* Copyright 2026 The uqdet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef UQDET_ERROR_H_
#define UQDET_ERROR_H_

#include <stdexcept>
#include <string>

namespace uqdet {

// Failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorKind {
  kValidation,  // malformed or inconsistent input (exit 2)
  kNumerical,   // NaN/Inf or a failed numerical check (exit 3)
  kContract,    // precondition violated by the caller (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void ThrowValidation(const std::string& message) {
  throw Error(ErrorKind::kValidation, message);
}
[[noreturn]] inline void ThrowNumerical(const std::string& message) {
  throw Error(ErrorKind::kNumerical, message);
}
[[noreturn]] inline void ThrowContract(const std::string& message) {
  throw Error(ErrorKind::kContract, message);
}

inline int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation:
      return 2;
    case ErrorKind::kNumerical:
      return 3;
    case ErrorKind::kContract:
      return 4;
  }
  return 1;
}

}  // namespace uqdet

#endif  // UQDET_ERROR_H_
