// Copyright 2026 The ConvMix Authors.
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

#ifndef CONVMIX_ERROR_H_
#define CONVMIX_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace convmix {

// Machine-readable failure categories. The CLI prints the category name on
// stderr so batch drivers can branch on it.
enum class ErrorKind {
  kParse,
  kValidation,
  kDuplicateKey,
  kIndex,
  kTransport,
  kEmptyGeneration,
  kUnderGeneration,
  kShape,
  kNumeric,
  kMissingTopics,
  kTooFewTopics,
  kFoldExhausted,
  kInsufficientPoints,
  kResolution,
  kStaleIndex,
  kNoEvaluableQueries,
  kDegenerate,
  kAlignment,
  kMissingInput,
  kConfig,
  kIo,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace convmix

#endif  // CONVMIX_ERROR_H_
