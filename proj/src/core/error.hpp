// Copyright 2026 The docqa Authors
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

#ifndef DOCQA_CORE_ERROR_HPP
#define DOCQA_CORE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace docqa {

// Error categories. Values are mirrored by docqa_status in the C API.
enum class ErrorCode {
  kInvalidArgument = 1,
  kIo = 2,
  kFormat = 3,
  kInvariant = 4,
  kUnalignable = 5,
  kBudget = 6,
  kMissingWindow = 7,
  kGeneration = 8,
  kInternal = 99,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Raised while decoding a single JSON value; the reader wraps it with the
// line number before it escapes.
class FieldError : public Error {
 public:
  FieldError(ErrorCode code, std::string field, const std::string& what)
      : Error(code, what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace docqa

#endif  // DOCQA_CORE_ERROR_HPP
