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

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gridflow/engine.hpp"

namespace gridflow {

using ojson = nlohmann::ordered_json;

struct QueueItem {
  enum class Type { UnitDone, UnitHang, Deadline, TransferDone, Timer, RetryDue, Message };
  Type type = Type::UnitDone;
  int ref = -1;           // unit or transfer id
  std::uint64_t gen = 0;  // must match the target's generation
  std::string name;       // activity id or message name
};

struct Unit {
  enum class Phase { Staging, Queued, Running, Done };
  int id = 0;
  std::string activity;
  int lane = 0;
  int attempt = 0;  // dispatch serial of the activity
  std::string service;
  std::string site;
  Phase phase = Phase::Staging;
  std::set<std::string> pending_inputs;
  std::map<std::string, std::uint64_t> reserved_inputs;
  std::uint64_t reserved_outputs = 0;
  std::optional<InjectedFault> fault;
  double started_at = 0.0;
  double duration = 0.0;
  std::uint64_t gen = 0;
  bool live = true;
};

struct Transfer {
  enum class Purpose { StageIn, Prefetch, Archive };
  int id = 0;
  Purpose purpose = Purpose::StageIn;
  std::string lfn;
  std::string from;
  std::string to;
  std::uint64_t bytes = 0;
  int unit = -1;             // StageIn owner
  std::vector<int> joiners;  // units waiting on a prefetch
  std::uint64_t reserved = 0;
  std::optional<InjectedFault> fault;
  std::uint64_t gen = 0;
  bool live = true;
};

struct ActivityRuntime {
  const Activity* activity = nullptr;
  const Activity* parent = nullptr;
  std::size_t order = 0;          // preorder index
  bool in_loop = false;           // has a While ancestor
  bool in_handler = false;        // inside a compensation handler
  std::string handler_owner;      // set on the root of a compensation handler
  int serial = 0;                 // dispatches over the whole run
  int rebinds_used = 0;
  std::set<std::string> tried;
  std::string last_service;
  std::optional<bool> retry_same_service;  // set while a retry is pending
  bool rebind_pending = false;
  std::vector<int> units;
  std::uint64_t timer_gen = 0;
};

struct Engine::Impl {
  Impl(const Workflow& w, RunEnvironment e, std::string id, double start_time = 0.0);

  // --- state -------------------------------------------------------------
  Workflow workflow;
  RunEnvironment env;
  ProcessInstance inst;
  EventQueue<QueueItem> queue;
  SlotPool slots;
  ReplicaCatalog catalog;
  StorageLedger ledger;
  CleanupPlan plan;
  std::set<std::string> cleaned;
  MonitoringSnapshot stats;
  ActionMonitor monitor{{}};

  std::map<std::string, ActivityRuntime> rt;
  std::map<std::string, std::string> producer;  // lfn -> invoke id
  std::vector<std::string> preorder;
  std::map<int, Unit> units;
  std::map<int, Transfer> transfers;
  std::map<std::pair<std::string, std::string>, int> prefetching;
  int next_unit = 0;
  int next_transfer = 0;
  int archive_inflight = 0;

  std::set<std::string> waiting;  // invokes blocked on producers
  std::map<std::string, int> mailbox;
  std::map<std::string, std::deque<std::string>> parked;
  std::vector<std::pair<std::string, double>> pending_messages;

  std::vector<std::string> completion_order;
  bool compensating = false;
  std::deque<std::string> compensation_queue;

  std::optional<CheckpointPolicy> cadence;
  int completions = 0;
  std::optional<CheckpointMode> checkpoint_due;
  int checkpoint_counter = 0;
  std::vector<Checkpoint> checkpoints;
  std::set<std::string> restored;
  std::map<std::string, std::uint64_t> stored;  // lfn copies held by the store
  std::uint64_t epoch = 0;

  std::vector<ProvenanceRecord> provenance;
  std::map<std::string, std::size_t> provenance_index;

  std::vector<EngineEvent> log;
  ojson ops = ojson::array();
  std::uint64_t next_seq = 0;
  std::size_t step_begin = 0;
  bool started = false;
  RunReport report;

  // --- helpers (engine.cpp) ------------------------------------------------
  void build_index();
  ActivityStatus status(const std::string& id) const;
  void set_status(const std::string& id, ActivityStatus to);
  bool done(const std::string& id) const;
  void emit(EventKind kind, std::string subject, ojson detail = ojson::object());
  double now() const { return queue.now(); }
  std::vector<EngineEvent> step();
  bool stale(const QueueItem& item) const;
  void dispatch_item(const QueueItem& item);
  void start();
  void check_completion();
  void finalize(ProcessState state, bool deadlock);
  void count_fault(const FaultEvent& f);
  void fire_alerts(const FaultEvent& f);

  // --- control flow (lifecycle.cpp) ----------------------------------------
  void activate(const std::string& id);
  void propagate_done(const std::string& id);
  void advance_sequence(const std::string& id);
  void iterate_loop(const std::string& id);
  void mark_dead(const Activity& a);
  void reset_subtree(const Activity& a);
  void after_invoke_done(const std::string& id);
  void release_cleanup(const std::string& id);
  void run_cleanup(const std::string& id, bool force = false);
  void recheck_waiting();
  void deliver_message(const std::string& name);
  void kick_ready_leaves();

  // --- work (work.cpp) ---------------------------------------------------
  void try_dispatch(const std::string& id);
  void dispatch(const std::string& id);
  std::vector<std::string> candidates_for(const std::string& id, bool exclude_tried) const;
  void submit(int uid);
  void start_unit(int uid);
  void release_slot(Unit& u);
  void release_reservations(Unit& u);
  void cancel_unit(int uid);
  void cancel_all_work();
  void on_unit_done(int uid);
  void on_unit_hang(int uid);
  void on_deadline(int uid);
  void on_transfer_done(int tid);
  void unit_failed(int uid, const FaultEvent& fault, ojson detail);
  void start_prefetch();
  void start_archive(const Activity& a, const std::string& site);
  std::uint64_t register_output(const std::string& lfn, const std::string& site, std::uint64_t size, bool partial);

  // --- recovery (recovery.cpp) ---------------------------------------------
  void raise(const std::string& id, FaultKind kind, ojson detail = ojson::object(), bool injected = false,
             const std::string& site = {});
  void resolve(const std::string& id, const FaultEvent& fault, ojson detail, const std::string& site);
  bool restorable() const;
  void begin_compensation();
  void compensate_next();
  void process_fault(bool deadlock);
  Checkpoint take_checkpoint(CheckpointMode mode);
  void restore(const Checkpoint& c, bool from_resume);

  // --- snapshot (snapshot.cpp) -----------------------------------------------
  ojson snapshot() const;
  void load_snapshot(const ojson& s, bool from_resume);
};

}  // namespace gridflow
