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

// Fault taxonomy, recovery policies and the policy-chain walker used by the
// engine's fault tolerance manager.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace gridflow {

enum class FaultLevel { Hardware, OperatingSystem, Middleware, Task, Workflow, User };

inline constexpr std::array<FaultLevel, 6> kFaultLevels = {
    FaultLevel::Hardware, FaultLevel::OperatingSystem, FaultLevel::Middleware,
    FaultLevel::Task,     FaultLevel::Workflow,        FaultLevel::User};

// Config/log names: "hardware", "os", "middleware", "task", "workflow", "user".
std::string_view level_name(FaultLevel level);
std::optional<FaultLevel> parse_level(std::string_view name);

enum class FaultKind {
  // Hardware
  MachineCrash,
  NetworkDown,
  // Operating system
  OutOfMemory,
  OutOfDisk,
  FileNotFound,
  CpuLimit,
  DiskQuota,
  NetworkCongestion,
  // Middleware
  AuthFailed,
  SubmitFailed,
  JobHanging,
  JobLost,
  TooManyRequests,
  ServiceUnreachable,
  StagingFailure,
  // Task
  MemoryLeak,
  UncaughtException,
  Deadlock,
  IncorrectOutput,
  MissingLibrary,
  JobCrash,
  // Workflow
  DataMovementFailed,
  InfiniteLoop,
  InputUnavailable,
  InputError,
  ProcessDeadlock,  // raised by the engine itself when no event can make progress
  // User
  AssertionFailed,
  UserException,
  MissedDeadline,
};

std::string_view kind_name(FaultKind kind);
std::optional<FaultKind> parse_kind(std::string_view name);
FaultLevel level_of(FaultKind kind);

// Kinds the injector draws from for a level. Engine-raised kinds
// (ProcessDeadlock, MissedDeadline) are never injected.
std::span<const FaultKind> injectable_kinds(FaultLevel level);

struct FaultEvent {
  FaultLevel level = FaultLevel::Task;
  FaultKind kind = FaultKind::JobCrash;
  bool detected = true;
  bool injected = false;  // drawn by the injector rather than raised by the engine
  std::string activity_id;
  double at = 0.0;

  bool operator==(const FaultEvent&) const = default;
};

// What grid-sim or the engine reports before classification.
struct RawFailure {
  FaultKind kind = FaultKind::JobCrash;
  bool detected = true;
  bool injected = false;
  std::string activity_id;
  double at = 0.0;
};

FaultEvent classify(const RawFailure& raw);

// ---------------------------------------------------------------------------
// Policies

struct RetryPolicy {
  int max_attempts = 1;  // total attempts, the first dispatch included
  double backoff_seconds = 0.0;
  bool same_service = true;
  bool operator==(const RetryPolicy&) const = default;
};

struct RebindPolicy {
  int max_alternatives = 1;
  bool operator==(const RebindPolicy&) const = default;
};

struct ReplicatePolicy {
  int k = 2;
  bool operator==(const ReplicatePolicy&) const = default;
};

enum class CheckpointMode { Light, Heavy };
std::string_view mode_name(CheckpointMode mode);
std::optional<CheckpointMode> parse_mode(std::string_view name);

struct CheckpointPolicy {
  CheckpointMode mode = CheckpointMode::Light;
  int every_n_completions = 1;
  bool operator==(const CheckpointPolicy&) const = default;
};

struct SavePartialPolicy {
  bool operator==(const SavePartialPolicy&) const = default;
};

struct CompensatePolicy {
  bool operator==(const CompensatePolicy&) const = default;
};

struct AlertAction {
  enum class Kind { EmitAlertEvent, RunHook };
  Kind kind = Kind::EmitAlertEvent;
  std::string hook;  // RunHook only
  bool operator==(const AlertAction&) const = default;
};

struct AlertPolicy {
  double window_seconds = 60.0;
  int fault_threshold = 1;
  AlertAction action;
  bool operator==(const AlertPolicy&) const = default;
};

using Policy = std::variant<RetryPolicy, RebindPolicy, ReplicatePolicy, CheckpointPolicy,
                            SavePartialPolicy, CompensatePolicy, AlertPolicy>;

// {"policy":"retry","max":3,"backoff_s":5,"same_service":true}
// {"policy":"rebind","max_alternatives":2}
// {"policy":"replicate","k":3}
// {"policy":"checkpoint","mode":"heavy","every_n":1}
// {"policy":"save_partial"}
// {"policy":"compensate"}
// {"policy":"alert","window_s":60,"threshold":3,"action":"emit"}
// {"policy":"alert","window_s":60,"threshold":3,"action":"hook","hook":"page-oncall"}
nlohmann::ordered_json policy_to_json(const Policy& policy);
Policy policy_from_json(const nlohmann::json& j);  // throws SyntaxError / MissingField

// ---------------------------------------------------------------------------
// Policy chain walking

struct HandleContext {
  bool is_invoke = true;
  int attempt_count = 0;  // dispatches so far for this activity
  int rebinds_used = 0;
  bool has_unused_candidate = false;
  bool checkpoint_restorable = false;
  bool has_outputs = false;
};

struct Resolution {
  enum class Outcome { Retry, Rebind, Restore, Compensate, Escalate };
  Outcome outcome = Outcome::Escalate;
  double delay_seconds = 0.0;
  bool same_service = true;
  bool save_partial = false;  // persist partial outputs before acting on `outcome`
  // Policies that were consulted but could not act, e.g. "NoAlternativeService".
  std::vector<std::string> exhausted;
};

std::string_view outcome_name(Resolution::Outcome outcome);

// Walks `own` then `inherited` (the enclosing scope's chain) left to right.
// Requires fault.detected.
Resolution handle(const FaultEvent& fault, std::span<const Policy> own,
                  std::span<const Policy> inherited, const HandleContext& context);

// ---------------------------------------------------------------------------
// Actions

struct FiredAction {
  std::size_t rule_index = 0;
  double at = 0.0;
  int fault_count = 0;
  AlertAction action;
};

// Incremental rule evaluation. A rule fires when at least `fault_threshold`
// detected faults recorded after its previous firing fall inside the trailing
// window.
class ActionMonitor {
 public:
  explicit ActionMonitor(std::vector<AlertPolicy> rules);

  std::vector<FiredAction> on_fault(double at);

  const std::vector<AlertPolicy>& rules() const noexcept { return rules_; }

 private:
  std::vector<AlertPolicy> rules_;
  std::vector<double> history_;
  std::vector<std::size_t> consumed_;  // per rule: history index after its last firing
};

std::vector<FiredAction> evaluate_actions(std::span<const double> detected_fault_times,
                                          std::span<const AlertPolicy> rules);

}  // namespace gridflow
