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
#include "gridflow/error.hpp"

namespace gridflow {

using S = ActivityStatus;

namespace {

int replication_of(const Activity& a, const Workflow& w) {
  for (const auto* chain : {&a.policy_chain, &w.default_policy_chain}) {
    for (const auto& p : *chain) {
      if (const auto* r = std::get_if<ReplicatePolicy>(&p)) return r->k;
    }
  }
  return 1;
}

ojson unit_detail(const Unit& u) {
  return {{"lane", u.lane}, {"attempt", u.attempt}, {"service", u.service}, {"site", u.site}};
}

ojson fault_detail(const FaultEvent& f, const ojson& extra) {
  ojson d = {{"level", level_name(f.level)},
             {"kind", kind_name(f.kind)},
             {"detected", f.detected},
             {"injected", f.injected}};
  for (const auto& [k, v] : extra.items()) d[k] = v;
  return d;
}

}  // namespace

std::vector<std::string> Engine::Impl::candidates_for(const std::string& id, bool exclude_tried) const {
  const auto& r = rt.at(id);
  const Activity& a = *r.activity;
  std::vector<std::string> out;
  if (a.binding.kind == Binding::Kind::Bound) {
    if (find_service(env.registry, a.binding.target)) out.push_back(a.binding.target);
  } else if (a.binding.kind == Binding::Kind::PortType) {
    out = find_candidates(env.registry, a.binding.target, env.rules, env.epoch + now(),
                          env.hierarchy ? &*env.hierarchy : nullptr);
    std::stable_sort(out.begin(), out.end(),
                     [&](const std::string& x, const std::string& y) { return ranks_before(x, y, stats); });
  }
  if (exclude_tried) {
    out.erase(std::remove_if(out.begin(), out.end(), [&](const std::string& s) { return r.tried.count(s) > 0; }),
              out.end());
  }
  return out;
}

void Engine::Impl::try_dispatch(const std::string& id) {
  if (inst.terminal() || status(id) != S::Ready) return;
  auto& r = rt.at(id);
  if (compensating && !r.in_handler) return;
  if (!r.units.empty()) return;
  for (const auto& lfn : r.activity->inputs) {
    auto p = producer.find(lfn);
    if (p == producer.end()) continue;
    const auto ps = status(p->second);
    if (ps == S::Finished) continue;
    if (ps == S::DeadPath || ps == S::Compensating || ps == S::Compensated) {
      ++r.serial;
      ++inst.activity_states.at(id).attempt_count;
      raise(id, FaultKind::InputUnavailable, {{"lfn", lfn}, {"reason", "producer " + std::string(status_name(ps))}});
      return;
    }
    waiting.insert(id);
    return;
  }
  dispatch(id);
}

void Engine::Impl::dispatch(const std::string& id) {
  auto& r = rt.at(id);
  const Activity& a = *r.activity;
  ++r.serial;
  ++inst.activity_states.at(id).attempt_count;

  const bool rebind = r.rebind_pending;
  r.rebind_pending = false;
  const auto same = r.retry_same_service;
  r.retry_same_service.reset();

  auto cands = candidates_for(id, rebind);
  if (same && !r.last_service.empty()) {
    const bool present = std::find(cands.begin(), cands.end(), r.last_service) != cands.end();
    if (*same && present) {
      cands = {r.last_service};
    } else if (!*same && present && cands.size() > 1) {
      cands.erase(std::find(cands.begin(), cands.end(), r.last_service));
    }
  }
  if (cands.empty()) {
    raise(id, FaultKind::ServiceUnreachable, {{"reason", "NoCandidates"}});
    return;
  }

  const int k = replication_of(a, workflow);
  const PlacementRequest req{a.outputs, a.inputs};
  std::set<std::string> used_sites;
  std::vector<int> launched;
  for (int lane = 0; lane < k; ++lane) {
    std::vector<std::string> pool;
    for (const auto& c : cands) {
      const auto* svc = find_service(env.registry, c);
      if (svc && env.grid.has_site(svc->site) && !used_sites.count(svc->site)) pool.push_back(c);
    }
    if (pool.empty()) {
      for (const auto& c : cands) {
        const auto* svc = find_service(env.registry, c);
        if (svc && env.grid.has_site(svc->site)) pool.push_back(c);
      }
    }
    std::string site;
    std::string service;
    std::vector<TransferJob> jobs;
    try {
      if (pool.empty()) throw Error(ErrorCode::NoCandidates, "no candidate runs on a known site");
      std::vector<std::string> sites;
      for (const auto& c : pool) sites.push_back(find_service(env.registry, c)->site);
      site = place_task(req, sites, ledger, catalog);
      std::vector<std::string> at_site;
      for (const auto& c : pool) {
        if (find_service(env.registry, c)->site == site) at_site.push_back(c);
      }
      service = gridflow::bind(at_site, stats);
      jobs = stage_in(a.inputs, site, catalog, env.grid);
    } catch (const Error& e) {
      if (lane > 0) break;
      FaultKind kind = FaultKind::StagingFailure;
      if (e.code() == ErrorCode::InputUnavailable) kind = FaultKind::InputUnavailable;
      if (e.code() == ErrorCode::NoCandidates) kind = FaultKind::ServiceUnreachable;
      raise(id, kind, {{"reason", to_string(e.code())}, {"message", e.what()}});
      return;
    }
    used_sites.insert(site);

    Unit u;
    u.id = next_unit++;
    u.activity = id;
    u.lane = lane;
    u.attempt = r.serial;
    u.service = service;
    u.site = site;
    for (const auto& o : a.outputs) {
      if (!catalog.at_site(o.lfn, site)) u.reserved_outputs += o.size_bytes;
    }
    ledger.reserve(site, u.reserved_outputs);
    for (const auto& j : jobs) {
      if (catalog.at_site(j.lfn, site)) continue;  // partial copy already charged
      u.reserved_inputs[j.lfn] = j.bytes;
      ledger.reserve(site, j.bytes);
    }
    ops.push_back({"dispatch", id, lane, service, site});
    ++stats.services[service].load;
    r.tried.insert(service);
    if (lane == 0) {
      inst.bindings[id] = BindingDecision{id, cands, service, now()};
      r.last_service = service;
    }
    const int uid = u.id;
    units.emplace(uid, std::move(u));
    r.units.push_back(uid);
    Unit& unit = units.at(uid);

    for (const auto& j : jobs) {
      unit.pending_inputs.insert(j.lfn);
      if (auto pf = prefetching.find({j.lfn, site}); pf != prefetching.end()) {
        transfers.at(pf->second).joiners.push_back(uid);
        continue;
      }
      Transfer t;
      t.id = next_transfer++;
      t.purpose = Transfer::Purpose::StageIn;
      t.lfn = j.lfn;
      t.from = j.from_site;
      t.to = site;
      t.bytes = j.bytes;
      t.unit = uid;
      RandomStream stream(substream_seed(env.seed, inst.instance_id, id + "<" + j.lfn, r.serial, lane, epoch));
      t.fault = inject_transfer_fault(env.faults, j.seconds, stream);
      const double at = now() + (t.fault ? t.fault->offset : j.seconds);
      queue.push(at, QueueItem{QueueItem::Type::TransferDone, t.id, t.gen, {}});
      transfers.emplace(t.id, std::move(t));
    }
    launched.push_back(uid);
  }
  if (k > 1) report.replicas_launched += static_cast<int>(launched.size());
  for (int uid : launched) {
    auto it = units.find(uid);
    if (it != units.end() && it->second.live && it->second.pending_inputs.empty()) submit(uid);
  }
}

void Engine::Impl::submit(int uid) {
  Unit& u = units.at(uid);
  u.phase = Unit::Phase::Queued;
  if (status(u.activity) == S::Ready) set_status(u.activity, S::Executing);
  if (slots.acquire(u.site, uid)) start_unit(uid);
}

void Engine::Impl::start_unit(int uid) {
  Unit& u = units.at(uid);
  ops.push_back({"acquire", u.site});
  u.phase = Unit::Phase::Running;
  u.started_at = now();
  const auto* svc = find_service(env.registry, u.service);
  const Activity& a = *rt.at(u.activity).activity;
  RandomStream stream(substream_seed(env.seed, inst.instance_id, u.activity, u.attempt, u.lane, epoch));
  u.duration = sample_duration(svc->mean_exec_seconds, svc->exec_jitter_fraction, stream);
  u.fault = inject(env.faults, u.duration, stream);
  if (u.fault && u.fault->detected) {
    queue.push(now() + u.fault->offset, QueueItem{QueueItem::Type::UnitDone, uid, u.gen, {}});
  } else if (u.fault) {
    queue.push(now() + u.fault->offset, QueueItem{QueueItem::Type::UnitHang, uid, u.gen, {}});
  } else {
    queue.push(now() + u.duration, QueueItem{QueueItem::Type::UnitDone, uid, u.gen, {}});
  }
  queue.push(now() + a.deadline.value_or(env.default_deadline), QueueItem{QueueItem::Type::Deadline, uid, u.gen, {}});
}

void Engine::Impl::release_slot(Unit& u) {
  if (u.phase == Unit::Phase::Running) {
    ops.push_back({"release", u.site});
    u.phase = Unit::Phase::Done;
    if (auto next = slots.release(u.site)) start_unit(*next);
  } else if (u.phase == Unit::Phase::Queued) {
    slots.withdraw(u.site, u.id);
  }
  u.phase = Unit::Phase::Done;
}

void Engine::Impl::release_reservations(Unit& u) {
  std::uint64_t bytes = u.reserved_outputs;
  for (const auto& [lfn, b] : u.reserved_inputs) bytes += b;
  ledger.release(u.site, bytes);
  u.reserved_outputs = 0;
  u.reserved_inputs.clear();
}

void Engine::Impl::cancel_unit(int uid) {
  Unit& u = units.at(uid);
  if (!u.live) return;
  u.live = false;
  ++u.gen;
  release_slot(u);
  release_reservations(u);
  for (auto& [tid, t] : transfers) {
    if (!t.live) continue;
    if (t.purpose == Transfer::Purpose::StageIn && t.unit == uid) {
      t.live = false;
      ++t.gen;
    }
    t.joiners.erase(std::remove(t.joiners.begin(), t.joiners.end(), uid), t.joiners.end());
  }
  --stats.services[u.service].load;
  auto& list = rt.at(u.activity).units;
  list.erase(std::remove(list.begin(), list.end(), uid), list.end());
}

void Engine::Impl::cancel_all_work() {
  // Waiting units go first so freed slots are not handed to them.
  std::vector<int> waiting_units;
  std::vector<int> running_units;
  for (const auto& [uid, u] : units) {
    if (!u.live) continue;
    (u.phase == Unit::Phase::Running ? running_units : waiting_units).push_back(uid);
  }
  for (int uid : waiting_units) cancel_unit(uid);
  for (int uid : running_units) cancel_unit(uid);
  for (auto& [tid, t] : transfers) {
    if (!t.live) continue;
    t.live = false;
    ++t.gen;
    if (t.purpose == Transfer::Purpose::Prefetch) ledger.release(t.to, t.reserved);
  }
  prefetching.clear();
  archive_inflight = 0;
  waiting.clear();
}

std::uint64_t Engine::Impl::register_output(const std::string& lfn, const std::string& site, std::uint64_t size,
                                            bool partial) {
  const bool existed = catalog.at_site(lfn, site) != nullptr;
  register_replica(catalog, ledger, lfn, site, size, now(), partial);
  if (existed) return 0;
  ops.push_back({"add", site, lfn, size});
  return size;
}

void Engine::Impl::on_unit_done(int uid) {
  Unit& u = units.at(uid);
  const std::string id = u.activity;
  auto& r = rt.at(id);
  const Activity& a = *r.activity;

  if (u.fault) {
    const auto f = classify(RawFailure{u.fault->kind, true, true, id, now()});
    unit_failed(uid, f, unit_detail(u));
    return;
  }

  // Outputs must fit the site before the completion is accepted.
  std::uint64_t need = 0;
  for (const auto& o : a.outputs) {
    if (!catalog.at_site(o.lfn, u.site)) need += o.size_bytes;
  }
  const auto& acct = ledger.site(u.site);
  bool sizes_ok = true;
  for (const auto& o : a.outputs) {
    if (auto sz = catalog.size_of(o.lfn); sz && *sz != o.size_bytes) sizes_ok = false;
  }
  if (acct.used + need > acct.capacity || !sizes_ok) {
    const auto f = classify(RawFailure{FaultKind::StagingFailure, true, false, id, now()});
    ojson d = unit_detail(u);
    d["reason"] = sizes_ok ? "StorageExceeded" : "SizeMismatch";
    unit_failed(uid, f, d);
    return;
  }

  u.live = false;
  ++u.gen;
  release_slot(u);
  release_reservations(u);
  auto& st = stats.services[u.service];
  --st.load;
  ++st.successes;
  r.units.erase(std::remove(r.units.begin(), r.units.end(), uid), r.units.end());

  ProvenanceRecord base;
  base.producing_activity = id;
  base.service_id = u.service;
  base.parameters = inst.variable_values;
  base.input_lfns = a.inputs;
  base.produced_at = now();
  for (const auto& o : a.outputs) {
    register_output(o.lfn, u.site, o.size_bytes, false);
    ProvenanceRecord rec = base;
    rec.lfn = o.lfn;
    if (auto it = provenance_index.find(o.lfn); it != provenance_index.end()) {
      provenance[it->second] = std::move(rec);
    } else {
      provenance_index[o.lfn] = provenance.size();
      provenance.push_back(std::move(rec));
    }
  }

  const auto siblings = r.units;
  for (int other : siblings) cancel_unit(other);
  if (a.sets) inst.variable_values[a.sets->variable] = a.sets->value;
  start_archive(a, u.site);

  set_status(id, S::Finished);
  completion_order.push_back(id);
  ojson d = unit_detail(u);
  d["duration"] = u.duration;
  if (!siblings.empty()) d["cancelled"] = siblings.size();
  emit(EventKind::TaskCompleted, id, std::move(d));
  after_invoke_done(id);
}

void Engine::Impl::on_unit_hang(int uid) {
  const Unit& u = units.at(uid);
  const auto f = classify(RawFailure{u.fault->kind, false, true, u.activity, now()});
  count_fault(f);
  ojson d = fault_detail(f, unit_detail(u));
  d["resolution"] = "none";
  emit(EventKind::TaskFailed, u.activity, std::move(d));
}

void Engine::Impl::on_deadline(int uid) {
  const Unit& u = units.at(uid);
  const auto f = classify(RawFailure{FaultKind::MissedDeadline, true, false, u.activity, now()});
  ojson d = unit_detail(u);
  d["deadline_s"] = rt.at(u.activity).activity->deadline.value_or(env.default_deadline);
  unit_failed(uid, f, d);
}

void Engine::Impl::unit_failed(int uid, const FaultEvent& fault, ojson detail) {
  Unit& u = units.at(uid);
  const std::string id = u.activity;
  const std::string site = u.site;
  cancel_unit(uid);
  ++stats.services[u.service].failures;
  auto& r = rt.at(id);
  if (!r.units.empty()) {
    count_fault(fault);
    ojson d = fault_detail(fault, detail);
    d["resolution"] = "replica_lost";
    emit(EventKind::TaskFailed, id, std::move(d));
    fire_alerts(fault);
    return;
  }
  set_status(id, S::Faulted);
  resolve(id, fault, std::move(detail), site);
}

void Engine::Impl::on_transfer_done(int tid) {
  Transfer& t = transfers.at(tid);
  t.live = false;
  ojson d = {{"from", t.from}, {"to", t.to}, {"bytes", t.bytes}};

  if (t.purpose == Transfer::Purpose::Prefetch) {
    prefetching.erase({t.lfn, t.to});
    ledger.release(t.to, t.reserved);
    bool ok = true;
    if (!cleaned.count(t.lfn)) {
      try {
        register_output(t.lfn, t.to, t.bytes, false);
      } catch (const Error&) {
        ok = false;
      }
    }
    d["purpose"] = "prefetch";
    d["ok"] = ok;
    emit(EventKind::TransferCompleted, t.lfn, std::move(d));
    const auto joiners = t.joiners;
    const std::string lfn = t.lfn;
    for (int uid : joiners) {
      auto it = units.find(uid);
      if (it == units.end() || !it->second.live) continue;
      Unit& u = it->second;
      if (!ok || !catalog.available_at(lfn, u.site)) {
        const auto f = classify(RawFailure{FaultKind::StagingFailure, true, false, u.activity, now()});
        ojson ud = unit_detail(u);
        ud["lfn"] = lfn;
        unit_failed(uid, f, ud);
        continue;
      }
      if (auto res = u.reserved_inputs.find(lfn); res != u.reserved_inputs.end()) {
        ledger.release(u.site, res->second);
        u.reserved_inputs.erase(res);
      }
      u.pending_inputs.erase(lfn);
      if (u.pending_inputs.empty()) submit(uid);
    }
    return;
  }

  if (t.purpose == Transfer::Purpose::Archive) {
    --archive_inflight;
    bool ok = true;
    try {
      register_output(t.lfn, t.to, t.bytes, false);
    } catch (const Error&) {
      ok = false;
    }
    d["purpose"] = "archive";
    d["ok"] = ok;
    emit(EventKind::TransferCompleted, t.lfn, std::move(d));
    return;
  }

  const int uid = t.unit;
  Unit& u = units.at(uid);
  const std::string lfn = t.lfn;
  if (t.fault) {
    const auto f = classify(RawFailure{FaultKind::DataMovementFailed, t.fault->detected, true, u.activity, now()});
    ojson ud = unit_detail(u);
    ud["lfn"] = lfn;
    if (f.detected) {
      unit_failed(uid, f, ud);
      return;
    }
    count_fault(f);
    ojson fd = fault_detail(f, ud);
    fd["resolution"] = "none";
    emit(EventKind::TaskFailed, u.activity, std::move(fd));
    const auto deadline = rt.at(u.activity).activity->deadline.value_or(env.default_deadline);
    queue.push(now() + deadline, QueueItem{QueueItem::Type::Deadline, uid, u.gen, {}});
    return;
  }

  if (auto res = u.reserved_inputs.find(lfn); res != u.reserved_inputs.end()) {
    ledger.release(u.site, res->second);
    u.reserved_inputs.erase(res);
  }
  try {
    register_output(lfn, t.to, t.bytes, false);
  } catch (const Error& e) {
    const auto f = classify(RawFailure{FaultKind::StagingFailure, true, false, u.activity, now()});
    ojson ud = unit_detail(u);
    ud["lfn"] = lfn;
    ud["reason"] = to_string(e.code());
    unit_failed(uid, f, ud);
    return;
  }
  d["purpose"] = "stage_in";
  d["activity"] = u.activity;
  emit(EventKind::TransferCompleted, lfn, std::move(d));
  u.pending_inputs.erase(lfn);
  if (u.pending_inputs.empty()) submit(uid);
}

void Engine::Impl::start_prefetch() {
  std::vector<PlacementHint> hints;
  try {
    hints = placement_hints(workflow, catalog, env.grid, env.registry);
  } catch (const Error&) {
    return;
  }
  for (const auto& h : hints) {
    if (prefetching.count({h.lfn, h.dest_site})) continue;
    ReplicaChoice choice;
    try {
      choice = select_replica(catalog, h.lfn, h.dest_site, env.grid);
    } catch (const Error&) {
      continue;
    }
    const auto bytes = choice.replica.size_bytes;
    if (!ledger.fits(h.dest_site, bytes)) continue;
    ledger.reserve(h.dest_site, bytes);
    Transfer t;
    t.id = next_transfer++;
    t.purpose = Transfer::Purpose::Prefetch;
    t.lfn = h.lfn;
    t.from = choice.replica.site;
    t.to = h.dest_site;
    t.bytes = bytes;
    t.reserved = bytes;
    queue.push(now() + choice.transfer_seconds, QueueItem{QueueItem::Type::TransferDone, t.id, t.gen, {}});
    prefetching[{h.lfn, h.dest_site}] = t.id;
    transfers.emplace(t.id, std::move(t));
  }
}

void Engine::Impl::start_archive(const Activity& a, const std::string& site) {
  if (!env.archive_site || !env.grid.has_site(*env.archive_site)) return;
  const auto& arch = *env.archive_site;
  for (const auto& o : a.outputs) {
    if (!workflow.final_outputs.count(o.lfn) || site == arch || catalog.at_site(o.lfn, arch)) continue;
    const auto secs = env.grid.transfer_time(site, arch, o.size_bytes);
    if (!secs) continue;
    Transfer t;
    t.id = next_transfer++;
    t.purpose = Transfer::Purpose::Archive;
    t.lfn = o.lfn;
    t.from = site;
    t.to = arch;
    t.bytes = o.size_bytes;
    queue.push(now() + *secs, QueueItem{QueueItem::Type::TransferDone, t.id, t.gen, {}});
    transfers.emplace(t.id, std::move(t));
    ++archive_inflight;
  }
}

}  // namespace gridflow
