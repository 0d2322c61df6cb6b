// Copyright 2026 The TypoLab Authors
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

#ifndef TYPOLAB_ERROR_HPP_
#define TYPOLAB_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace typolab {

// Error kinds raised by the library. Each maps to one of the CLI exit-code
// categories (validation = 2, data = 3, model = 4).
enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kIo,
  kParse,
  kEmptyResult,
  kNotEnoughWords,
  kNoMatchingSegmentation,
  kInsufficientSamples,
  kInsufficientAnswerable,
  kSequenceTooLong,
  kDidNotConverge,
  kBadCheckpoint,
};

enum class ErrorCategory { kValidation, kData, kModel };

constexpr ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kShapeMismatch:
      return ErrorCategory::kValidation;
    case ErrorCode::kSequenceTooLong:
    case ErrorCode::kDidNotConverge:
    case ErrorCode::kBadCheckpoint:
      return ErrorCategory::kModel;
    default:
      return ErrorCategory::kData;
  }
}

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kEmptyResult: return "EmptyResult";
    case ErrorCode::kNotEnoughWords: return "NotEnoughWords";
    case ErrorCode::kNoMatchingSegmentation: return "NoMatchingSegmentation";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kInsufficientAnswerable: return "InsufficientAnswerable";
    case ErrorCode::kSequenceTooLong: return "SequenceTooLong";
    case ErrorCode::kDidNotConverge: return "DidNotConverge";
    case ErrorCode::kBadCheckpoint: return "BadCheckpoint";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

// Raised when training finishes below the requested accuracy floor.
class DidNotConverge : public Error {
 public:
  DidNotConverge(double achieved, double required)
      : Error(ErrorCode::kDidNotConverge,
              "greedy accuracy " + std::to_string(achieved) +
                  " below required " + std::to_string(required)),
        achieved_(achieved) {}

  double achieved_accuracy() const noexcept { return achieved_; }

 private:
  double achieved_;
};

#define TYPOLAB_REQUIRE(cond, code, msg)                 \
  do {                                                   \
    if (!(cond)) throw ::typolab::Error((code), (msg));  \
  } while (false)

}  // namespace typolab

#endif  // TYPOLAB_ERROR_HPP_
