/*
 * Copyright 2026 The labelfish Authors
 *
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

#ifndef LABELFISH_ERROR_H_
#define LABELFISH_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace labelfish {

enum class ErrorCode {
  kShape,
  kDomain,
  kContract,
  kConfig,
  kFormat,
  kProtocol,
  kRange,
  kConditioning,
  kArchitecture,
  kDataAgnosticism,
  kNotSingleSample,
  kUndefined,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure surfaced by the library is an Error carrying a code, so
// callers (and the experiment harness) can tell which stage failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) +
                           " error: " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShape:
      return "shape";
    case ErrorCode::kDomain:
      return "domain";
    case ErrorCode::kContract:
      return "contract";
    case ErrorCode::kConfig:
      return "config";
    case ErrorCode::kFormat:
      return "format";
    case ErrorCode::kProtocol:
      return "protocol";
    case ErrorCode::kRange:
      return "range";
    case ErrorCode::kConditioning:
      return "conditioning";
    case ErrorCode::kArchitecture:
      return "architecture";
    case ErrorCode::kDataAgnosticism:
      return "data-agnosticism";
    case ErrorCode::kNotSingleSample:
      return "not-a-single-sample";
    case ErrorCode::kUndefined:
      return "undefined";
    case ErrorCode::kIo:
      return "io";
  }
  return "unknown";
}

}  // namespace labelfish

#endif  // LABELFISH_ERROR_H_
