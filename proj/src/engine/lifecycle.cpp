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

#include "engine/impl.hpp"

namespace gridflow {

using S = ActivityStatus;

void Engine::Impl::activate(const std::string& id) {
  if (inst.terminal()) return;
  auto& r = rt.at(id);
  if (compensating && !r.in_handler) return;
  const Activity& a = *r.activity;
  set_status(id, S::Ready);
  switch (a.kind) {
    case ActivityKind::Invoke: {
      inst.activity_states.at(id).attempt_count = 0;
      r.rebinds_used = 0;
      r.tried.clear();
      r.last_service.clear();
      r.retry_same_service.reset();
      r.rebind_pending = false;
      try_dispatch(id);
      break;
    }
    case ActivityKind::Wait:
      set_status(id, S::Executing);
      queue.push(now() + a.duration, QueueItem{QueueItem::Type::Timer, -1, r.timer_gen, id});
      break;
    case ActivityKind::Receive:
      set_status(id, S::Executing);
      if (auto it = mailbox.find(a.message_name); it != mailbox.end() && it->second > 0) {
        if (--it->second == 0) mailbox.erase(it);
        set_status(id, S::Finished);
        propagate_done(id);
      } else {
        parked[a.message_name].push_back(id);
      }
      break;
    case ActivityKind::Sequence:
      set_status(id, S::Executing);
      advance_sequence(id);
      break;
    case ActivityKind::Flow: {
      set_status(id, S::Executing);
      const auto children = a.structural_children();
      if (children.empty()) {
        set_status(id, S::Finished);
        propagate_done(id);
        break;
      }
      for (const auto& child : children) {
        if (inst.terminal() || status(id) != S::Executing) break;
        if (status(child.id) == S::Inactive) activate(child.id);
      }
      break;
    }
    case ActivityKind::If: {
      set_status(id, S::Executing);
      const bool taken_then = a.condition && evaluate(*a.condition, inst.variable_values);
      const Activity* taken = taken_then ? a.then_branch() : a.else_branch();
      const Activity* untaken = taken_then ? a.else_branch() : a.then_branch();
      if (untaken) mark_dead(*untaken);
      if (inst.terminal()) break;
      if (taken) {
        activate(taken->id);
      } else {
        set_status(id, S::Finished);
        propagate_done(id);
      }
      break;
    }
    case ActivityKind::While:
      set_status(id, S::Executing);
      inst.loop_counters[id] = 0;
      iterate_loop(id);
      break;
  }
}

void Engine::Impl::propagate_done(const std::string& id) {
  if (inst.terminal()) return;
  const auto& r = rt.at(id);
  if (!r.handler_owner.empty()) {
    set_status(r.handler_owner, S::Compensated);
    compensate_next();
    return;
  }
  if (!r.parent) return;
  const auto& pid = r.parent->id;
  if (compensating && !rt.at(pid).in_handler) return;
  if (status(pid) != S::Executing) return;
  switch (r.parent->kind) {
    case ActivityKind::Sequence: advance_sequence(pid); break;
    case ActivityKind::Flow: {
      const auto children = r.parent->structural_children();
      if (std::all_of(children.begin(), children.end(), [&](const Activity& c) { return done(c.id); })) {
        set_status(pid, S::Finished);
        propagate_done(pid);
      }
      break;
    }
    case ActivityKind::If:
      set_status(pid, S::Finished);
      propagate_done(pid);
      break;
    case ActivityKind::While: iterate_loop(pid); break;
    default: break;
  }
}

void Engine::Impl::advance_sequence(const std::string& id) {
  for (const auto& child : rt.at(id).activity->structural_children()) {
    if (done(child.id)) continue;
    if (status(child.id) == S::Inactive) activate(child.id);
    return;
  }
  set_status(id, S::Finished);
  propagate_done(id);
}

void Engine::Impl::iterate_loop(const std::string& id) {
  const Activity& a = *rt.at(id).activity;
  const Activity* body = a.body();
  const bool holds = a.condition && evaluate(*a.condition, inst.variable_values);
  if (!holds || !body) {
    set_status(id, S::Finished);
    if (!rt.at(id).in_loop) release_cleanup(id);
    propagate_done(id);
    return;
  }
  int& n = inst.loop_counters[id];
  if (n >= a.max_iterations) {
    raise(id, FaultKind::InfiniteLoop, {{"iterations", n}});
    return;
  }
  ++n;
  if (status(body->id) != S::Inactive) reset_subtree(*body);
  activate(body->id);
}

void Engine::Impl::mark_dead(const Activity& a) {
  std::vector<std::string> invokes;
  std::function<void(const Activity&)> walk = [&](const Activity& x) {
    if (status(x.id) == S::Inactive) set_status(x.id, S::DeadPath);
    if (x.kind == ActivityKind::Invoke) invokes.push_back(x.id);
    for (const auto& c : x.children) walk(c);
  };
  walk(a);
  for (const auto& id : invokes) run_cleanup(id);
  recheck_waiting();
}

void Engine::Impl::reset_subtree(const Activity& a) {
  const auto s = status(a.id);
  if (s == S::Finished || s == S::DeadPath) set_status(a.id, S::Inactive);
  for (const auto& c : a.children) reset_subtree(c);
}

void Engine::Impl::after_invoke_done(const std::string& id) {
  if (!compensating && cadence && ++completions % cadence->every_n_completions == 0) checkpoint_due = cadence->mode;
  run_cleanup(id);
  recheck_waiting();
  propagate_done(id);
}

void Engine::Impl::release_cleanup(const std::string& loop_id) {
  std::function<void(const Activity&)> walk = [&](const Activity& x) {
    if (x.kind == ActivityKind::Invoke && done(x.id)) run_cleanup(x.id, true);
    for (const auto& c : x.children) walk(c);
  };
  walk(*rt.at(loop_id).activity);
}

void Engine::Impl::run_cleanup(const std::string& id, bool force) {
  if (!env.cleanup || rt.at(id).in_handler) return;
  if (rt.at(id).in_loop && !force) return;
  for (const auto& [lfn, pending] : plan.triggers) {
    if (pending.size() == 1 && pending.count(id)) cleaned.insert(lfn);
  }
  const auto jobs = on_task_finished(plan, id, catalog);
  std::map<std::string, std::vector<const CleanupJob*>> by_lfn;
  for (const auto& j : jobs) by_lfn[j.lfn].push_back(&j);
  for (const auto& [lfn, list] : by_lfn) {
    ojson sites = ojson::array();
    std::uint64_t freed = 0;
    for (const auto* j : list) {
      const auto bytes = remove_replica(catalog, ledger, j->lfn, j->site, now());
      ops.push_back({"remove", j->site, j->lfn, bytes});
      sites.push_back(j->site);
      freed += bytes;
    }
    emit(EventKind::CleanupDone, lfn, {{"sites", std::move(sites)}, {"bytes", freed}, {"after", id}});
  }
}

void Engine::Impl::recheck_waiting() {
  if (waiting.empty()) return;
  std::vector<std::string> ids(waiting.begin(), waiting.end());
  std::sort(ids.begin(), ids.end(), [&](const auto& a, const auto& b) { return rt.at(a).order < rt.at(b).order; });
  for (const auto& id : ids) {
    if (inst.terminal()) return;
    if (!waiting.erase(id)) continue;
    try_dispatch(id);
  }
}

void Engine::Impl::deliver_message(const std::string& name) {
  auto pm = std::find_if(pending_messages.begin(), pending_messages.end(),
                         [&](const auto& m) { return m.first == name && m.second <= now(); });
  if (pm != pending_messages.end()) pending_messages.erase(pm);
  auto it = parked.find(name);
  if (it != parked.end() && !it->second.empty()) {
    const std::string rid = it->second.front();
    it->second.pop_front();
    if (it->second.empty()) parked.erase(it);
    set_status(rid, S::Finished);
    emit(EventKind::MessageArrived, name, {{"consumed_by", rid}});
    propagate_done(rid);
    return;
  }
  const int buffered = ++mailbox[name];
  emit(EventKind::MessageArrived, name, {{"consumed_by", nullptr}, {"buffered", buffered}});
}

void Engine::Impl::kick_ready_leaves() {
  for (const auto& id : preorder) {
    if (inst.terminal()) return;
    const auto& r = rt.at(id);
    if (status(id) != S::Ready || r.in_handler) continue;
    const Activity& a = *r.activity;
    switch (a.kind) {
      case ActivityKind::Invoke: try_dispatch(id); break;
      case ActivityKind::Wait:
        set_status(id, S::Executing);
        queue.push(now() + a.duration, QueueItem{QueueItem::Type::Timer, -1, rt.at(id).timer_gen, id});
        break;
      case ActivityKind::Receive:
        set_status(id, S::Executing);
        if (auto it = mailbox.find(a.message_name); it != mailbox.end() && it->second > 0) {
          if (--it->second == 0) mailbox.erase(it);
          set_status(id, S::Finished);
          propagate_done(id);
        } else {
          parked[a.message_name].push_back(id);
        }
        break;
      default: break;
    }
  }
}

}  // namespace gridflow
