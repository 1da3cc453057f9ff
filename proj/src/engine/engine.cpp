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

#include <atomic>

#include "engine/impl.hpp"
#include "gridflow/error.hpp"

namespace gridflow {

namespace {

constexpr std::array<std::string_view, 6> kStateNames = {"Created", "Running", "Suspended",
                                                         "Completed", "Faulted", "Compensated"};
constexpr std::array<std::string_view, 8> kStatusNames = {"Inactive", "Ready",        "Executing",   "Finished",
                                                          "Faulted",  "Compensating", "Compensated", "DeadPath"};
constexpr std::array<std::string_view, 11> kEventNames = {
    "InstanceStarted", "TaskCompleted",      "TaskFailed",  "TimerFired", "MessageArrived",    "TransferCompleted",
    "CheckpointTaken", "CheckpointRestored", "CleanupDone", "AlertFired", "InstanceTerminated"};

std::atomic<std::uint64_t> g_instances{0};

}  // namespace

std::string_view state_name(ProcessState state) { return kStateNames[static_cast<std::size_t>(state)]; }

std::string_view status_name(ActivityStatus status) { return kStatusNames[static_cast<std::size_t>(status)]; }

std::optional<ActivityStatus> parse_status(std::string_view name) {
  for (std::size_t i = 0; i < kStatusNames.size(); ++i) {
    if (kStatusNames[i] == name) return static_cast<ActivityStatus>(i);
  }
  return std::nullopt;
}

bool legal_transition(ActivityStatus from, ActivityStatus to) {
  using S = ActivityStatus;
  switch (from) {
    case S::Inactive: return to == S::Ready || to == S::DeadPath;
    case S::Ready: return to == S::Executing || to == S::Faulted;
    case S::Executing: return to == S::Finished || to == S::Faulted;
    case S::Faulted: return to == S::Ready;
    case S::Finished: return to == S::Compensating || to == S::Inactive;
    case S::Compensating: return to == S::Compensated;
    case S::Compensated: return false;
    case S::DeadPath: return to == S::Inactive;
  }
  return false;
}

const ActivityState& ProcessInstance::at(std::string_view id) const {
  auto it = activity_states.find(std::string(id));
  if (it == activity_states.end()) throw Error(ErrorCode::InvalidWorkflow, "no activity '" + std::string(id) + "'");
  return it->second;
}

ProcessInstance instantiate(const Workflow& w, std::string instance_id) {
  if (has_abstract_bindings(w)) {
    throw Error(ErrorCode::AbstractActivityRemains, "workflow '" + w.id + "' still has abstract bindings");
  }
  const auto report = validate(w);
  if (!report.ok()) {
    const auto& v = report.violations.front();
    throw Error(ErrorCode::InvalidWorkflow, std::string(violation_name(v.kind)) + ": " + v.message);
  }
  ProcessInstance inst;
  inst.instance_id = instance_id.empty() ? w.id + "-" + std::to_string(++g_instances) : std::move(instance_id);
  inst.workflow = w;
  visit_activities(w, [&](const Activity& a, const Activity*) { inst.activity_states[a.id] = ActivityState{}; });
  for (const auto& v : w.variables) inst.variable_values[v.name] = v.init;
  return inst;
}

std::string_view event_kind_name(EventKind kind) { return kEventNames[static_cast<std::size_t>(kind)]; }

std::optional<EventKind> parse_event_kind(std::string_view name) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i) {
    if (kEventNames[i] == name) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

ojson event_to_json(const EngineEvent& e) {
  return {{"seq", e.seq}, {"t", e.at}, {"kind", event_kind_name(e.kind)}, {"subject", e.subject}, {"detail", e.detail}};
}

std::string event_line(const EngineEvent& e) { return event_to_json(e).dump(); }

ojson report_to_json(const RunReport& r) {
  ojson faults = ojson::object();
  for (FaultLevel level : kFaultLevels) {
    LevelCounts c;
    if (auto it = r.faults.find(level); it != r.faults.end()) c = it->second;
    faults[std::string(level_name(level))] = {{"injected", c.injected}, {"detected", c.detected}, {"raised", c.raised}};
  }
  ojson peak = ojson::object();
  for (const auto& [site, bytes] : r.peak_storage) peak[site] = bytes;
  return {{"state", state_name(r.state)},
          {"deadlock", r.deadlock},
          {"makespan", r.makespan},
          {"faults", std::move(faults)},
          {"retries", r.retries},
          {"rebinds", r.rebinds},
          {"replicas_launched", r.replicas_launched},
          {"checkpoints_taken", r.checkpoints_taken},
          {"restores", r.restores},
          {"alerts", r.alerts},
          {"peak_storage", std::move(peak)}};
}

int exit_code(const RunReport& r) {
  if (r.deadlock) return 5;
  switch (r.state) {
    case ProcessState::Completed: return 0;
    case ProcessState::Faulted:
    case ProcessState::Compensated: return 4;
    default: return 1;
  }
}

// ---------------------------------------------------------------------------

Engine::Impl::Impl(const Workflow& w, RunEnvironment e, std::string id, double start_time)
    : workflow(w),
      env(std::move(e)),
      inst(instantiate(w, id.empty() ? w.id + "-1" : std::move(id))),
      slots(env.grid),
      ledger(env.grid, env.store_capacity),
      stats(MonitoringSnapshot::from_registry(env.registry)) {
  build_index();
  queue.advance_to(start_time);
  if (env.cleanup) {
    plan = plan_cleanup(workflow);
  } else {
    plan.protected_files = workflow.final_outputs;
  }

  std::vector<AlertPolicy> rules;
  auto scan = [&](const std::vector<Policy>& chain) {
    for (const auto& p : chain) {
      if (const auto* a = std::get_if<AlertPolicy>(&p)) rules.push_back(*a);
      if (const auto* c = std::get_if<CheckpointPolicy>(&p); c && !cadence) cadence = *c;
    }
  };
  scan(workflow.default_policy_chain);
  for (const auto& aid : preorder) scan(rt.at(aid).activity->policy_chain);
  monitor = ActionMonitor(std::move(rules));

  for (const auto& [lfn, list] : env.catalog.entries()) {
    for (const auto& r : list) {
      if (!env.grid.has_site(r.site)) {
        throw Error(ErrorCode::InvalidConfig, "catalog places '" + lfn + "' on unknown site '" + r.site + "'");
      }
      register_output(lfn, r.site, r.size_bytes, r.partial);
    }
  }
}

void Engine::Impl::build_index() {
  std::size_t order = 0;
  std::function<void(const Activity&, const Activity*, bool, bool)> walk = [&](const Activity& a, const Activity* parent,
                                                                                bool in_loop, bool in_handler) {
    auto& r = rt[a.id];
    r.activity = &a;
    r.parent = parent;
    r.order = order++;
    r.in_loop = in_loop;
    r.in_handler = in_handler;
    preorder.push_back(a.id);
    if (a.kind == ActivityKind::Invoke) {
      for (const auto& o : a.outputs) producer[o.lfn] = a.id;
      if (const auto* h = a.compensation()) {
        walk(*h, &a, in_loop, true);
        rt[h->id].handler_owner = a.id;
      }
      return;
    }
    for (const auto& child : a.children) walk(child, &a, in_loop || a.kind == ActivityKind::While, in_handler);
  };
  walk(workflow.root, nullptr, false, false);
}

ActivityStatus Engine::Impl::status(const std::string& id) const { return inst.activity_states.at(id).status; }

bool Engine::Impl::done(const std::string& id) const {
  const auto s = status(id);
  return s == ActivityStatus::Finished || s == ActivityStatus::DeadPath;
}

void Engine::Impl::set_status(const std::string& id, ActivityStatus to) {
  auto& st = inst.activity_states.at(id);
  if (st.status == to) return;
  if (!legal_transition(st.status, to)) {
    throw std::logic_error("illegal transition of '" + id + "': " + std::string(status_name(st.status)) + " -> " +
                           std::string(status_name(to)));
  }
  ops.push_back({"T", id, status_name(st.status), status_name(to)});
  st.status = to;
  switch (to) {
    case ActivityStatus::Inactive:
      st.started_at.reset();
      st.ended_at.reset();
      break;
    case ActivityStatus::Executing: st.started_at = now(); break;
    case ActivityStatus::Finished:
    case ActivityStatus::Faulted:
    case ActivityStatus::DeadPath:
    case ActivityStatus::Compensated: st.ended_at = now(); break;
    default: break;
  }
}

void Engine::Impl::emit(EventKind kind, std::string subject, ojson detail) {
  EngineEvent e;
  e.seq = next_seq++;
  e.at = now();
  e.kind = kind;
  e.subject = std::move(subject);
  e.detail = std::move(detail);
  if (!ops.empty()) {
    e.detail["ops"] = std::move(ops);
    ops = ojson::array();
  }
  log.push_back(std::move(e));
}

bool Engine::Impl::stale(const QueueItem& item) const {
  switch (item.type) {
    case QueueItem::Type::UnitDone:
    case QueueItem::Type::UnitHang:
    case QueueItem::Type::Deadline: {
      auto it = units.find(item.ref);
      return it == units.end() || !it->second.live || it->second.gen != item.gen;
    }
    case QueueItem::Type::TransferDone: {
      auto it = transfers.find(item.ref);
      return it == transfers.end() || !it->second.live || it->second.gen != item.gen;
    }
    case QueueItem::Type::Timer:
    case QueueItem::Type::RetryDue: return rt.at(item.name).timer_gen != item.gen;
    case QueueItem::Type::Message: return false;
  }
  return true;
}

std::vector<EngineEvent> Engine::Impl::step() {
  if (inst.terminal()) return {};
  step_begin = log.size();
  if (!started) {
    start();
  } else {
    while (!queue.empty() && stale(queue.top().payload)) queue.discard();
    if (queue.empty()) {
      const auto& root = workflow.root.id;
      FaultEvent f{FaultLevel::Workflow, FaultKind::ProcessDeadlock, true, false, root, now()};
      count_fault(f);
      emit(EventKind::TaskFailed, root,
           {{"level", level_name(f.level)},
            {"kind", kind_name(f.kind)},
            {"detected", true},
            {"injected", false},
            {"resolution", "escalate"}});
      process_fault(true);
    } else {
      auto e = queue.pop();
      dispatch_item(e.payload);
    }
  }
  if (!inst.terminal()) check_completion();
  if (!inst.terminal() && checkpoint_due) {
    const auto mode = *checkpoint_due;
    checkpoint_due.reset();
    try {
      take_checkpoint(mode);
    } catch (const Error& e) {
      emit(EventKind::CheckpointTaken, "", {{"mode", mode_name(mode)}, {"error", to_string(e.code())}});
    }
  }
  if (!ops.empty() && log.size() > step_begin) {
    log.back().detail["ops_after"] = std::move(ops);
    ops = ojson::array();
  }
  return {log.begin() + static_cast<std::ptrdiff_t>(step_begin), log.end()};
}

void Engine::Impl::dispatch_item(const QueueItem& item) {
  switch (item.type) {
    case QueueItem::Type::UnitDone: on_unit_done(item.ref); break;
    case QueueItem::Type::UnitHang: on_unit_hang(item.ref); break;
    case QueueItem::Type::Deadline: on_deadline(item.ref); break;
    case QueueItem::Type::TransferDone: on_transfer_done(item.ref); break;
    case QueueItem::Type::Timer:
      set_status(item.name, ActivityStatus::Finished);
      emit(EventKind::TimerFired, item.name, {{"purpose", "wait"}});
      propagate_done(item.name);
      break;
    case QueueItem::Type::RetryDue:
      emit(EventKind::TimerFired, item.name, {{"purpose", "retry"}});
      try_dispatch(item.name);
      break;
    case QueueItem::Type::Message: deliver_message(item.name); break;
  }
}

void Engine::Impl::start() {
  started = true;
  inst.state = ProcessState::Running;
  emit(EventKind::InstanceStarted, inst.instance_id, {{"workflow", workflow.id}, {"seed", env.seed}});
  for (const auto& [name, at] : env.messages) {
    pending_messages.emplace_back(name, at);
    queue.push(at, QueueItem{QueueItem::Type::Message, -1, 0, name});
  }
  activate(workflow.root.id);
  if (!inst.terminal()) start_prefetch();
}

void Engine::Impl::check_completion() {
  if (inst.state != ProcessState::Running || compensating) return;
  if (status(workflow.root.id) != ActivityStatus::Finished || archive_inflight > 0) return;
  for (const auto& id : preorder) {
    if (rt.at(id).in_handler && status(id) == ActivityStatus::Inactive) set_status(id, ActivityStatus::DeadPath);
  }
  cancel_all_work();
  finalize(ProcessState::Completed, false);
}

void Engine::Impl::finalize(ProcessState state, bool deadlock) {
  inst.state = state;
  report.state = state;
  report.deadlock = deadlock;
  report.makespan = now();
  report.peak_storage.clear();
  for (const auto& [site, a] : ledger.sites()) report.peak_storage[site] = a.peak;
  emit(EventKind::InstanceTerminated, inst.instance_id,
       {{"state", state_name(state)}, {"deadlock", deadlock}, {"makespan", now()}});
  queue.clear();
}

void Engine::Impl::count_fault(const FaultEvent& f) {
  auto& c = report.faults[f.level];
  if (f.injected) {
    ++c.injected;
    if (f.detected) ++c.detected;
  } else {
    ++c.raised;
  }
}

void Engine::Impl::fire_alerts(const FaultEvent& f) {
  if (!f.detected) return;
  for (const auto& fired : monitor.on_fault(now())) {
    ++report.alerts;
    ojson d = {{"rule", fired.rule_index},
               {"fault_count", fired.fault_count},
               {"action", fired.action.kind == AlertAction::Kind::RunHook ? "hook" : "emit"}};
    if (fired.action.kind == AlertAction::Kind::RunHook) d["hook"] = fired.action.hook;
    emit(EventKind::AlertFired, "rule-" + std::to_string(fired.rule_index), std::move(d));
  }
}

// ---------------------------------------------------------------------------

Engine::Engine(const Workflow& w, RunEnvironment env, std::string instance_id)
    : impl_(std::make_unique<Impl>(w, std::move(env), std::move(instance_id))) {}

Engine::Engine(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;
Engine::~Engine() = default;

Engine Engine::resume(const Checkpoint& checkpoint, RunEnvironment env, std::optional<ReplicaCatalog> current) {
  const auto& s = checkpoint.snapshot;
  if (!s.contains("instance") || !s["instance"].contains("workflow") || !s.contains("catalog")) {
    throw Error(ErrorCode::CorruptCheckpoint, "snapshot lacks instance or catalog");
  }
  Workflow w;
  try {
    w = workflow_from_json(nlohmann::json::parse(s["instance"]["workflow"].dump()));
    env.catalog = current ? std::move(*current) : catalog_from_json(nlohmann::json::parse(s["catalog"].dump()));
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("snapshot: ") + e.what());
  }
  if (s.contains("runtime") && s["runtime"].contains("seed")) env.seed = s["runtime"]["seed"].get<std::uint64_t>();
  auto impl = std::make_unique<Impl>(w, std::move(env), checkpoint.instance_id, checkpoint.at);
  impl->restore(checkpoint, true);
  return Engine(std::move(impl));
}

std::vector<EngineEvent> Engine::step() { return impl_->step(); }

const RunReport& Engine::run_to_completion() {
  while (!impl_->inst.terminal()) impl_->step();
  return impl_->report;
}

void Engine::inject_message(std::string name, double at) {
  at = std::max(at, impl_->now());
  impl_->pending_messages.emplace_back(name, at);
  impl_->queue.push(at, QueueItem{QueueItem::Type::Message, -1, 0, std::move(name)});
}

Checkpoint Engine::take_checkpoint(CheckpointMode mode) {
  impl_->step_begin = impl_->log.size();
  return impl_->take_checkpoint(mode);
}

void Engine::restore(const Checkpoint& checkpoint) { impl_->restore(checkpoint, false); }

const ProcessInstance& Engine::instance() const { return impl_->inst; }
const std::vector<EngineEvent>& Engine::log() const { return impl_->log; }
const ReplicaCatalog& Engine::catalog() const { return impl_->catalog; }
const StorageLedger& Engine::ledger() const { return impl_->ledger; }
const std::vector<ProvenanceRecord>& Engine::provenance() const { return impl_->provenance; }
const std::vector<Checkpoint>& Engine::checkpoints() const { return impl_->checkpoints; }
const RunReport& Engine::report() const { return impl_->report; }
double Engine::now() const { return impl_->now(); }
bool Engine::terminal() const { return impl_->inst.terminal(); }

RunResult run_to_completion(const Workflow& w, RunEnvironment env) {
  Engine engine(w, std::move(env));
  engine.run_to_completion();
  RunResult out;
  out.report = engine.report();
  out.log = engine.log();
  out.catalog = engine.catalog();
  out.provenance = engine.provenance();
  out.ledger = engine.ledger();
  return out;
}

}  // namespace gridflow
