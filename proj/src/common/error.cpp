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

#include "gridflow/error.hpp"

namespace gridflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownActivityKind: return "UnknownActivityKind";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidWorkflow: return "InvalidWorkflow";
    case ErrorCode::UnknownFile: return "UnknownFile";
    case ErrorCode::UnknownConcept: return "UnknownConcept";
    case ErrorCode::InvalidHierarchy: return "InvalidHierarchy";
    case ErrorCode::InvalidRegistry: return "InvalidRegistry";
    case ErrorCode::NoMatchingPortType: return "NoMatchingPortType";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::AbstractActivityRemains: return "AbstractActivityRemains";
    case ErrorCode::StorageExceeded: return "StorageExceeded";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::InputUnavailable: return "InputUnavailable";
    case ErrorCode::NoAlternativeService: return "NoAlternativeService";
    case ErrorCode::NoCheckpoint: return "NoCheckpoint";
    case ErrorCode::StaleLightCheckpoint: return "StaleLightCheckpoint";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::DuplicateSite: return "DuplicateSite";
    case ErrorCode::DanglingLink: return "DanglingLink";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NoPendingEvents: return "NoPendingEvents";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

SyntaxError::SyntaxError(const std::string& message, std::size_t line, std::size_t column)
    : Error(ErrorCode::SyntaxError,
            line == 0 ? message
                      : "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

NoMatchingPortTypeError::NoMatchingPortTypeError(std::string activity_id, std::string concept_name)
    : Error(ErrorCode::NoMatchingPortType,
            "no registry service matches concept '" + concept_name + "' required by activity '" + activity_id +
                "'"),
      activity_id_(std::move(activity_id)),
      concept_(std::move(concept_name)) {}

namespace {
std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}
}  // namespace

StaleLightCheckpointError::StaleLightCheckpointError(std::vector<std::string> missing)
    : Error(ErrorCode::StaleLightCheckpoint, "referenced intermediate data no longer exists: " + join(missing)),
      missing_(std::move(missing)) {}

}  // namespace gridflow
