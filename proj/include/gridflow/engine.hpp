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

// Process, queue, work and time managers driving a workflow instance over the
// simulated grid in virtual time.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridflow/binding.hpp"
#include "gridflow/checkpoint.hpp"
#include "gridflow/data.hpp"
#include "gridflow/fault.hpp"
#include "gridflow/grid.hpp"
#include "gridflow/workflow.hpp"
#include "json.hpp"

namespace gridflow {

enum class ProcessState { Created, Running, Suspended, Completed, Faulted, Compensated };

enum class ActivityStatus { Inactive, Ready, Executing, Finished, Faulted, Compensating, Compensated, DeadPath };

std::string_view state_name(ProcessState state);
std::string_view status_name(ActivityStatus status);
std::optional<ActivityStatus> parse_status(std::string_view name);

// Allowed edges of the activity state diagram. Finished/DeadPath -> Inactive
// only occurs when a loop body is reset.
bool legal_transition(ActivityStatus from, ActivityStatus to);

struct ActivityState {
  ActivityStatus status = ActivityStatus::Inactive;
  int attempt_count = 0;
  std::optional<double> started_at;
  std::optional<double> ended_at;
  bool operator==(const ActivityState&) const = default;
};

struct ProcessInstance {
  std::string instance_id;
  Workflow workflow;
  ProcessState state = ProcessState::Created;
  std::map<std::string, ActivityState> activity_states;
  VariableMap variable_values;
  std::map<std::string, BindingDecision> bindings;
  std::map<std::string, int> loop_counters;

  const ActivityState& at(std::string_view id) const;
  bool terminal() const noexcept {
    return state == ProcessState::Completed || state == ProcessState::Faulted || state == ProcessState::Compensated;
  }
};

// Throws AbstractActivityRemains, InvalidWorkflow. An empty id draws a fresh
// one from a process-wide counter.
ProcessInstance instantiate(const Workflow& w, std::string instance_id = {});

enum class EventKind {
  InstanceStarted,
  TaskCompleted,
  TaskFailed,
  TimerFired,
  MessageArrived,
  TransferCompleted,
  CheckpointTaken,
  CheckpointRestored,
  CleanupDone,
  AlertFired,
  InstanceTerminated,
};

std::string_view event_kind_name(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view name);

// `detail.ops` lists, in order, the effects of the event:
//   ["T", id, from, to]            activity transition
//   ["acquire", site] / ["release", site]
//   ["add", site, lfn, bytes] / ["remove", site, lfn, bytes]
//   ["store", lfn, bytes]          heavy checkpoint copy
//   ["dispatch", id, lane, service, site]
// Effects that follow the last line of a step go to `detail.ops_after`.
struct EngineEvent {
  std::uint64_t seq = 0;
  double at = 0.0;
  EventKind kind = EventKind::TaskCompleted;
  std::string subject;
  nlohmann::ordered_json detail = nlohmann::ordered_json::object();
};

// {"seq","t","kind","subject","detail"}
nlohmann::ordered_json event_to_json(const EngineEvent& e);
std::string event_line(const EngineEvent& e);

inline constexpr double kDefaultDeadlineSeconds = 86400.0;
inline constexpr double kDefaultEpoch = 1700000000.0;

struct RunEnvironment {
  Grid grid;
  Registry registry;
  std::optional<ConceptHierarchy> hierarchy;
  FaultInjectorConfig faults;
  std::uint64_t seed = 0;
  ReplicaCatalog catalog;  // initial replicas, charged at t = 0
  bool cleanup = true;
  std::optional<std::string> archive_site;
  std::optional<std::uint64_t> store_capacity;
  std::optional<std::string> checkpoint_dir;
  double epoch = kDefaultEpoch;  // registry time of virtual t = 0
  double default_deadline = kDefaultDeadlineSeconds;
  MatchRules rules = MatchRules::defaults();
  std::vector<std::pair<std::string, double>> messages;  // (name, at)
};

struct LevelCounts {
  int injected = 0;
  int detected = 0;  // injected faults that were detected
  int raised = 0;    // faults raised by the engine itself
};

struct RunReport {
  ProcessState state = ProcessState::Created;
  bool deadlock = false;
  double makespan = 0.0;
  std::map<FaultLevel, LevelCounts> faults;
  int retries = 0;
  int rebinds = 0;
  int replicas_launched = 0;
  int checkpoints_taken = 0;
  int restores = 0;
  int alerts = 0;
  std::map<std::string, std::uint64_t> peak_storage;
};

nlohmann::ordered_json report_to_json(const RunReport& r);
// 0 Completed, 4 Faulted/Compensated, 5 deadlock.
int exit_code(const RunReport& r);

class Engine {
 public:
  Engine(const Workflow& w, RunEnvironment env, std::string instance_id = {});
  // Resumes from a checkpoint. `current` is the catalog as it stands now; when
  // absent the catalog recorded in the snapshot is used. Throws
  // StaleLightCheckpoint, CorruptCheckpoint.
  static Engine resume(const Checkpoint& checkpoint, RunEnvironment env,
                       std::optional<ReplicaCatalog> current = std::nullopt);

  Engine(Engine&&) noexcept;
  Engine& operator=(Engine&&) noexcept;
  ~Engine();

  // Processes the earliest pending event and returns the log lines it
  // produced. Empty once the instance is terminal.
  std::vector<EngineEvent> step();
  const RunReport& run_to_completion();

  void inject_message(std::string name, double at);

  // Requires a Running instance. Throws StorageExceeded (Heavy, store full).
  Checkpoint take_checkpoint(CheckpointMode mode);
  // In-flight work is dropped; Executing leaves return to Ready. Throws
  // StaleLightCheckpoint.
  void restore(const Checkpoint& checkpoint);

  const ProcessInstance& instance() const;
  const std::vector<EngineEvent>& log() const;
  const ReplicaCatalog& catalog() const;
  const StorageLedger& ledger() const;
  const std::vector<ProvenanceRecord>& provenance() const;
  const std::vector<Checkpoint>& checkpoints() const;
  const RunReport& report() const;
  double now() const;
  bool terminal() const;

  struct Impl;

 private:
  explicit Engine(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

struct RunResult {
  RunReport report;
  std::vector<EngineEvent> log;
  ReplicaCatalog catalog;
  std::vector<ProvenanceRecord> provenance;
  StorageLedger ledger;
};

RunResult run_to_completion(const Workflow& w, RunEnvironment env);

}  // namespace gridflow
