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
#include <filesystem>

#include "engine/impl.hpp"
#include "gridflow/error.hpp"

namespace gridflow {

using S = ActivityStatus;

void Engine::Impl::raise(const std::string& id, FaultKind kind, ojson detail, bool injected, const std::string& site) {
  const auto f = classify(RawFailure{kind, true, injected, id, now()});
  const auto s = status(id);
  if (s == S::Ready || s == S::Executing) set_status(id, S::Faulted);
  resolve(id, f, std::move(detail), site);
}

void Engine::Impl::resolve(const std::string& id, const FaultEvent& fault, ojson detail, const std::string& site) {
  count_fault(fault);
  auto& r = rt.at(id);
  const Activity& a = *r.activity;
  const bool is_invoke = a.kind == ActivityKind::Invoke;

  HandleContext ctx;
  ctx.is_invoke = is_invoke;
  ctx.attempt_count = inst.activity_states.at(id).attempt_count;
  ctx.rebinds_used = r.rebinds_used;
  ctx.has_unused_candidate = is_invoke && !candidates_for(id, true).empty();
  ctx.checkpoint_restorable = !compensating && restorable();
  ctx.has_outputs = is_invoke && !a.outputs.empty();

  const std::vector<Policy> none;
  auto res = handle(fault, is_invoke ? a.policy_chain : none, workflow.default_policy_chain, ctx);
  if (compensating && res.outcome == Resolution::Outcome::Compensate) res.outcome = Resolution::Outcome::Escalate;

  ojson d = {{"level", level_name(fault.level)},
             {"kind", kind_name(fault.kind)},
             {"detected", fault.detected},
             {"injected", fault.injected}};
  for (const auto& [k, v] : detail.items()) d[k] = v;

  if (res.save_partial && !site.empty()) {
    ojson saved = ojson::array();
    for (const auto& o : a.outputs) {
      if (catalog.at_site(o.lfn, site)) continue;
      try {
        register_output(o.lfn, site, o.size_bytes, true);
        saved.push_back(o.lfn);
      } catch (const Error&) {
      }
    }
    d["saved_partial"] = std::move(saved);
  }
  d["resolution"] = outcome_name(res.outcome);
  if (!res.exhausted.empty()) d["exhausted"] = res.exhausted;
  if (res.outcome == Resolution::Outcome::Retry) d["delay_s"] = res.delay_seconds;
  emit(EventKind::TaskFailed, id, std::move(d));
  fire_alerts(fault);

  switch (res.outcome) {
    case Resolution::Outcome::Retry:
      ++report.retries;
      set_status(id, S::Ready);
      r.retry_same_service = res.same_service;
      if (res.delay_seconds > 0) {
        queue.push(now() + res.delay_seconds, QueueItem{QueueItem::Type::RetryDue, -1, r.timer_gen, id});
      } else {
        try_dispatch(id);
      }
      break;
    case Resolution::Outcome::Rebind:
      ++report.rebinds;
      ++r.rebinds_used;
      r.rebind_pending = true;
      set_status(id, S::Ready);
      try_dispatch(id);
      break;
    case Resolution::Outcome::Restore:
      try {
        restore(checkpoints.back(), false);
      } catch (const Error&) {
        process_fault(false);
      }
      break;
    case Resolution::Outcome::Compensate: begin_compensation(); break;
    case Resolution::Outcome::Escalate: process_fault(false); break;
  }
}

bool Engine::Impl::restorable() const {
  if (checkpoints.empty()) return false;
  const auto& c = checkpoints.back();
  if (restored.count(c.checkpoint_id)) return false;
  return c.mode == CheckpointMode::Heavy || missing_replicas(c, catalog).empty();
}

void Engine::Impl::begin_compensation() {
  compensating = true;
  cancel_all_work();
  queue.clear();
  for (const auto& [name, at] : pending_messages) queue.push(at, QueueItem{QueueItem::Type::Message, -1, 0, name});
  parked.clear();
  for (const auto& id : preorder) {
    if (!rt.at(id).in_handler && status(id) == S::Executing) set_status(id, S::Faulted);
  }
  compensation_queue.clear();
  std::set<std::string> seen;
  for (auto it = completion_order.rbegin(); it != completion_order.rend(); ++it) {
    if (rt.at(*it).in_handler || !seen.insert(*it).second) continue;
    compensation_queue.push_back(*it);
  }
  compensate_next();
}

void Engine::Impl::compensate_next() {
  while (!compensation_queue.empty()) {
    const std::string id = compensation_queue.front();
    compensation_queue.pop_front();
    if (status(id) != S::Finished) continue;
    set_status(id, S::Compensating);
    if (const auto* h = rt.at(id).activity->compensation()) {
      activate(h->id);
      return;
    }
    set_status(id, S::Compensated);
  }
  if (!inst.terminal()) finalize(ProcessState::Compensated, false);
}

void Engine::Impl::process_fault(bool deadlock) {
  cancel_all_work();
  for (const auto& id : preorder) {
    if (status(id) == S::Executing) set_status(id, S::Faulted);
  }
  parked.clear();
  finalize(ProcessState::Faulted, deadlock);
}

Checkpoint Engine::Impl::take_checkpoint(CheckpointMode mode) {
  if (inst.state != ProcessState::Running) {
    throw Error(ErrorCode::InvalidConfig, "checkpoints need a running instance");
  }
  Checkpoint c;
  c.mode = mode;
  c.instance_id = inst.instance_id;
  c.at = now();
  for (const auto& [lfn, list] : catalog.entries()) {
    for (const auto& rep : list) {
      if (!rep.partial) c.data.put(lfn, rep);
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> copies;
  if (mode == CheckpointMode::Heavy) {
    for (const auto& [lfn, list] : c.data.entries()) {
      if (!stored.count(lfn)) {
        copies.emplace_back(lfn, list.front().size_bytes);
        c.store_bytes += list.front().size_bytes;
      }
    }
    if (!ledger.store_fits(c.store_bytes)) {
      throw Error(ErrorCode::StorageExceeded,
                  "checkpoint store cannot hold " + std::to_string(c.store_bytes) + " more bytes");
    }
    for (const auto& [lfn, bytes] : copies) {
      ledger.store_add(bytes, now());
      stored[lfn] = bytes;
      ops.push_back({"store", lfn, bytes});
    }
  }
  c.checkpoint_id = inst.instance_id + "#" + std::to_string(++checkpoint_counter);
  c.snapshot = snapshot();
  ++report.checkpoints_taken;

  ojson d = {{"mode", mode_name(mode)}, {"files", c.data.entries().size()}, {"store_bytes", c.store_bytes}};
  if (env.checkpoint_dir) {
    std::string name = c.checkpoint_id;
    std::replace_if(name.begin(), name.end(), [](char ch) { return ch == '/' || ch == '#'; }, '-');
    const auto path = (std::filesystem::path(*env.checkpoint_dir) / (name + ".ckpt")).string();
    write_checkpoint(c, path);
    d["path"] = path;
  }
  checkpoints.push_back(c);
  emit(EventKind::CheckpointTaken, c.checkpoint_id, std::move(d));
  return c;
}

void Engine::Impl::restore(const Checkpoint& c, bool from_resume) {
  if (c.mode == CheckpointMode::Light) {
    auto missing = missing_replicas(c, catalog);
    if (!missing.empty()) throw StaleLightCheckpointError(std::move(missing));
  }
  if (!from_resume) {
    cancel_all_work();
    queue.clear();
  }
  load_snapshot(c.snapshot, from_resume);
  for (const auto& [name, at] : pending_messages) queue.push(at, QueueItem{QueueItem::Type::Message, -1, 0, name});
  compensating = false;
  compensation_queue.clear();
  parked.clear();
  waiting.clear();
  checkpoint_due.reset();

  // Files whose producer had not finished at the checkpoint are discarded.
  std::vector<std::pair<std::string, std::string>> prune;
  for (const auto& [lfn, list] : catalog.entries()) {
    auto p = producer.find(lfn);
    if (p == producer.end() || status(p->second) == S::Finished) continue;
    for (const auto& rep : list) prune.emplace_back(lfn, rep.site);
  }
  for (const auto& [lfn, site] : prune) {
    const auto bytes = remove_replica(catalog, ledger, lfn, site, now());
    ops.push_back({"remove", site, lfn, bytes});
  }
  if (c.mode == CheckpointMode::Heavy) {
    for (const auto& [lfn, list] : c.data.entries()) {
      for (const auto& rep : list) {
        if (!catalog.available_at(lfn, rep.site)) register_output(lfn, rep.site, rep.size_bytes, false);
      }
    }
    if (from_resume) {
      for (const auto& [lfn, bytes] : stored) {
        ledger.store_add(bytes, now());
        ops.push_back({"store", lfn, bytes});
      }
    }
  }

  ++epoch;
  restored.insert(c.checkpoint_id);
  ++report.restores;
  started = true;
  inst.state = ProcessState::Running;

  ojson states = ojson::object();
  for (const auto& id : preorder) {
    auto& st = inst.activity_states.at(id);
    const auto kind = rt.at(id).activity->kind;
    const bool leaf = kind == ActivityKind::Invoke || kind == ActivityKind::Wait || kind == ActivityKind::Receive;
    if (leaf && st.status == S::Executing) {
      st.status = S::Ready;
      st.started_at.reset();
    }
    states[id] = status_name(st.status);
  }
  emit(EventKind::CheckpointRestored, c.checkpoint_id,
       {{"mode", mode_name(c.mode)},
        {"epoch", epoch},
        {"at", c.at},
        {"resumed", from_resume},
        {"states", std::move(states)}});
  kick_ready_leaves();
}

}  // namespace gridflow
