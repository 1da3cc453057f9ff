/* Copyright 2026 The gridflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gridflow {

enum class ErrorCode {
  SyntaxError,
  UnknownActivityKind,
  MissingField,
  InvalidWorkflow,
  UnknownFile,
  UnknownConcept,
  InvalidHierarchy,
  InvalidRegistry,
  NoMatchingPortType,
  NoCandidates,
  AbstractActivityRemains,
  StorageExceeded,
  SizeMismatch,
  Unreachable,
  InputUnavailable,
  NoAlternativeService,
  NoCheckpoint,
  StaleLightCheckpoint,
  CorruptCheckpoint,
  DuplicateSite,
  DanglingLink,
  InvalidGrid,
  InvalidConfig,
  NoPendingEvents,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Base of every error raised by the library. `code()` is the stable tag the
// CLI maps onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, std::size_t line, std::size_t column);

  // 1-based; 0 when the error is about document shape rather than a byte position.
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class NoMatchingPortTypeError : public Error {
 public:
  NoMatchingPortTypeError(std::string activity_id, std::string concept_name);

  const std::string& activity_id() const noexcept { return activity_id_; }
  const std::string& concept_name() const noexcept { return concept_; }

 private:
  std::string activity_id_;
  std::string concept_;
};

class StaleLightCheckpointError : public Error {
 public:
  explicit StaleLightCheckpointError(std::vector<std::string> missing);

  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  std::vector<std::string> missing_;
};

}  // namespace gridflow
