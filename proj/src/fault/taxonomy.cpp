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

#include <algorithm>

#include "gridflow/fault.hpp"

namespace gridflow {

namespace {

struct KindInfo {
  FaultKind kind;
  std::string_view name;
  FaultLevel level;
};

constexpr KindInfo kKinds[] = {
    {FaultKind::MachineCrash, "MachineCrash", FaultLevel::Hardware},
    {FaultKind::NetworkDown, "NetworkDown", FaultLevel::Hardware},
    {FaultKind::OutOfMemory, "OutOfMemory", FaultLevel::OperatingSystem},
    {FaultKind::OutOfDisk, "OutOfDisk", FaultLevel::OperatingSystem},
    {FaultKind::FileNotFound, "FileNotFound", FaultLevel::OperatingSystem},
    {FaultKind::CpuLimit, "CpuLimit", FaultLevel::OperatingSystem},
    {FaultKind::DiskQuota, "DiskQuota", FaultLevel::OperatingSystem},
    {FaultKind::NetworkCongestion, "NetworkCongestion", FaultLevel::OperatingSystem},
    {FaultKind::AuthFailed, "AuthFailed", FaultLevel::Middleware},
    {FaultKind::SubmitFailed, "SubmitFailed", FaultLevel::Middleware},
    {FaultKind::JobHanging, "JobHanging", FaultLevel::Middleware},
    {FaultKind::JobLost, "JobLost", FaultLevel::Middleware},
    {FaultKind::TooManyRequests, "TooManyRequests", FaultLevel::Middleware},
    {FaultKind::ServiceUnreachable, "ServiceUnreachable", FaultLevel::Middleware},
    {FaultKind::StagingFailure, "StagingFailure", FaultLevel::Middleware},
    {FaultKind::MemoryLeak, "MemoryLeak", FaultLevel::Task},
    {FaultKind::UncaughtException, "UncaughtException", FaultLevel::Task},
    {FaultKind::Deadlock, "Deadlock", FaultLevel::Task},
    {FaultKind::IncorrectOutput, "IncorrectOutput", FaultLevel::Task},
    {FaultKind::MissingLibrary, "MissingLibrary", FaultLevel::Task},
    {FaultKind::JobCrash, "JobCrash", FaultLevel::Task},
    {FaultKind::DataMovementFailed, "DataMovementFailed", FaultLevel::Workflow},
    {FaultKind::InfiniteLoop, "InfiniteLoop", FaultLevel::Workflow},
    {FaultKind::InputUnavailable, "InputUnavailable", FaultLevel::Workflow},
    {FaultKind::InputError, "InputError", FaultLevel::Workflow},
    {FaultKind::ProcessDeadlock, "ProcessDeadlock", FaultLevel::Workflow},
    {FaultKind::AssertionFailed, "AssertionFailed", FaultLevel::User},
    {FaultKind::UserException, "UserException", FaultLevel::User},
    {FaultKind::MissedDeadline, "MissedDeadline", FaultLevel::User},
};

const KindInfo& info(FaultKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k;
  }
  return kKinds[0];
}

constexpr FaultKind kHardwareKinds[] = {FaultKind::MachineCrash, FaultKind::NetworkDown};
constexpr FaultKind kOsKinds[] = {FaultKind::OutOfMemory, FaultKind::OutOfDisk,  FaultKind::FileNotFound,
                                  FaultKind::CpuLimit,    FaultKind::DiskQuota,  FaultKind::NetworkCongestion};
constexpr FaultKind kMiddlewareKinds[] = {FaultKind::AuthFailed,      FaultKind::SubmitFailed,
                                          FaultKind::JobHanging,      FaultKind::JobLost,
                                          FaultKind::TooManyRequests, FaultKind::ServiceUnreachable,
                                          FaultKind::StagingFailure};
constexpr FaultKind kTaskKinds[] = {FaultKind::MemoryLeak,      FaultKind::UncaughtException,
                                    FaultKind::Deadlock,        FaultKind::IncorrectOutput,
                                    FaultKind::MissingLibrary,  FaultKind::JobCrash};
constexpr FaultKind kWorkflowKinds[] = {FaultKind::InfiniteLoop, FaultKind::InputUnavailable, FaultKind::InputError,
                                        FaultKind::DataMovementFailed};
constexpr FaultKind kUserKinds[] = {FaultKind::AssertionFailed, FaultKind::UserException};

}  // namespace

std::string_view level_name(FaultLevel level) {
  switch (level) {
    case FaultLevel::Hardware: return "hardware";
    case FaultLevel::OperatingSystem: return "os";
    case FaultLevel::Middleware: return "middleware";
    case FaultLevel::Task: return "task";
    case FaultLevel::Workflow: return "workflow";
    case FaultLevel::User: return "user";
  }
  return "unknown";
}

std::optional<FaultLevel> parse_level(std::string_view name) {
  for (FaultLevel level : kFaultLevels) {
    if (level_name(level) == name) return level;
  }
  return std::nullopt;
}

std::string_view kind_name(FaultKind kind) { return info(kind).name; }

std::optional<FaultKind> parse_kind(std::string_view name) {
  for (const auto& k : kKinds) {
    if (k.name == name) return k.kind;
  }
  return std::nullopt;
}

FaultLevel level_of(FaultKind kind) { return info(kind).level; }

std::span<const FaultKind> injectable_kinds(FaultLevel level) {
  switch (level) {
    case FaultLevel::Hardware: return kHardwareKinds;
    case FaultLevel::OperatingSystem: return kOsKinds;
    case FaultLevel::Middleware: return kMiddlewareKinds;
    case FaultLevel::Task: return kTaskKinds;
    case FaultLevel::Workflow: return kWorkflowKinds;
    case FaultLevel::User: return kUserKinds;
  }
  return {};
}

FaultEvent classify(const RawFailure& raw) {
  FaultEvent event;
  event.kind = raw.kind;
  event.level = level_of(raw.kind);
  event.detected = raw.detected;
  event.injected = raw.injected;
  event.activity_id = raw.activity_id;
  event.at = raw.at;
  return event;
}

}  // namespace gridflow
