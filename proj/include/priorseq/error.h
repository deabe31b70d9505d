// Copyright 2026 The PriorSeq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#ifndef PRIORSEQ_ERROR_H_
#define PRIORSEQ_ERROR_H_

#include <stdexcept>
#include <string>

namespace priorseq {

enum class ErrorCode {
  kEmptyCorpus,
  kMaskEmpty,
  kNonFiniteGradient,
  kShapeMismatch,
  kDimensionMismatch,
  kMissingFeature,
  kMalformedInput,
  kInvalidArgument,
  kMissingCache,
  kIo,
  kConfig,
};

const char* ErrorCodeName(ErrorCode code);

// All module failures surface as Error. `module` names the component that
// raised it so the CLI can report provenance.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, const std::string& message)
      : std::runtime_error(module + ": " + ErrorCodeName(code) + ": " +
                           message),
        code_(code),
        module_(std::move(module)) {}

  ErrorCode code() const { return code_; }
  const std::string& module() const { return module_; }

 private:
  ErrorCode code_;
  std::string module_;
};

inline const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kMaskEmpty: return "MaskEmpty";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kMissingFeature: return "MissingFeature";
    case ErrorCode::kMalformedInput: return "MalformedInput";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMissingCache: return "MissingCache";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

}  // namespace priorseq

#endif  // PRIORSEQ_ERROR_H_
