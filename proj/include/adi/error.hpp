// Copyright 2026 The ADI Intonation Authors
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adi {

enum class ErrorCode {
  kInvalidArgument,
  kIoError,
  kUnsupportedFormat,
  kMalformedFile,
  kEmptyAudio,
  kInvalidSample,
  kShapeMismatch,
  kNumerical,
  kState,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kIoError: return "i/o error";
    case ErrorCode::kUnsupportedFormat: return "unsupported format";
    case ErrorCode::kMalformedFile: return "malformed file";
    case ErrorCode::kEmptyAudio: return "empty audio";
    case ErrorCode::kInvalidSample: return "invalid sample";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kNumerical: return "numerical error";
    case ErrorCode::kState: return "invalid state";
  }
  return "unknown";
}

// Every failure in the library surfaces as an adi::Error carrying a code, so
// callers can tell e.g. an unreadable WAV from one with an unsupported codec.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace detail
}  // namespace adi
