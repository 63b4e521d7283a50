// Copyright 2026 The Taiyan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "taiyan/error.hpp"

namespace taiyan {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedPunctuation: return "MalformedPunctuation";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kUnknownId: return "UnknownId";
    case ErrorCode::kSequenceTooLong: return "SequenceTooLong";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kStepOutOfRange: return "StepOutOfRange";
    case ErrorCode::kAllMasked: return "AllMasked";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kTextMismatch: return "TextMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kAlignmentMismatch: return "AlignmentMismatch";
    case ErrorCode::kMissingAnswer: return "MissingAnswer";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kBadCheckpoint: return "BadCheckpoint";
    case ErrorCode::kWordNotInText: return "WordNotInText";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

}  // namespace taiyan
