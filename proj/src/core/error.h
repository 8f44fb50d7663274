/* Copyright 2026 The attnseg Authors. All Rights Reserved.

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

#ifndef ATTNSEG_CORE_ERROR_H_
#define ATTNSEG_CORE_ERROR_H_

#include <stdexcept>
#include <string>

namespace attnseg {

// Error classes surfaced by the engine. The C API maps these one-to-one onto
// attnseg_status values and the CLI maps them onto exit codes.
enum class ErrorKind {
  kArgument,
  kConfig,
  kFormat,
  kUnsupportedDtype,
  kData,
  kShape,
  kManifest,
  kSplit,
  kIo,
  kInternal,
};

inline const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArgument: return "argument error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kUnsupportedDtype: return "unsupported-dtype error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kManifest: return "manifest error";
    case ErrorKind::kSplit: return "split error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kInternal: return "internal error";
  }
  return "internal error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace attnseg

#endif  // ATTNSEG_CORE_ERROR_H_
