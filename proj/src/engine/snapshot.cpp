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

#include "common/json_util.hpp"
#include "engine/impl.hpp"

namespace gridflow {

namespace {

ojson opt_time(const std::optional<double>& t) { return t ? ojson(*t) : ojson(nullptr); }

std::optional<double> read_time(const nlohmann::json& j, std::string_view key) {
  const auto* v = detail::optional_field(j, key);
  if (!v) return std::nullopt;
  return detail::as_number(*v, key);
}

}  // namespace

ojson Engine::Impl::snapshot() const {
  ojson states = ojson::object();
  for (const auto& id : preorder) {
    const auto& st = inst.activity_states.at(id);
    states[id] = {{"status", status_name(st.status)},
                  {"attempt_count", st.attempt_count},
                  {"started_at", opt_time(st.started_at)},
                  {"ended_at", opt_time(st.ended_at)}};
  }
  ojson vars = ojson::object();
  for (const auto& [name, v] : inst.variable_values) vars[name] = value_to_json(v);
  ojson bindings = ojson::object();
  for (const auto& [id, b] : inst.bindings) {
    bindings[id] = {{"candidates", b.candidates}, {"chosen", b.chosen}, {"decided_at", b.decided_at}};
  }
  ojson loops = ojson::object();
  for (const auto& [id, n] : inst.loop_counters) loops[id] = n;

  ojson acts = ojson::object();
  for (const auto& id : preorder) {
    const auto& r = rt.at(id);
    if (r.activity->kind != ActivityKind::Invoke) continue;
    acts[id] = {{"serial", r.serial},
                {"rebinds_used", r.rebinds_used},
                {"tried", r.tried},
                {"last_service", r.last_service}};
  }
  ojson mail = ojson::object();
  for (const auto& [name, n] : mailbox) mail[name] = n;
  ojson pending = ojson::array();
  for (const auto& [name, at] : pending_messages) pending.push_back({name, at});
  ojson triggers = ojson::object();
  for (const auto& [lfn, ids] : plan.triggers) triggers[lfn] = ids;
  ojson prov = ojson::array();
  for (const auto& p : provenance) prov.push_back(provenance_to_json(p));
  ojson store = ojson::object();
  for (const auto& [lfn, bytes] : stored) store[lfn] = bytes;
  ojson svc = ojson::object();
  for (const auto& [id, s] : stats.services) svc[id] = {{"successes", s.successes}, {"failures", s.failures}};

  return {{"instance",
           {{"instance_id", inst.instance_id},
            {"state", state_name(inst.state)},
            {"workflow", workflow_to_json(workflow)},
            {"activity_states", std::move(states)},
            {"variables", std::move(vars)},
            {"bindings", std::move(bindings)},
            {"loop_counters", std::move(loops)}}},
          {"runtime",
           {{"seed", env.seed},
            {"epoch", epoch},
            {"t", now()},
            {"activities", std::move(acts)},
            {"completion_order", completion_order},
            {"completions", completions},
            {"checkpoint_counter", checkpoint_counter},
            {"mailbox", std::move(mail)},
            {"pending_messages", std::move(pending)},
            {"cleanup", {{"triggers", std::move(triggers)}, {"cleaned", cleaned}}},
            {"provenance", std::move(prov)},
            {"stored", std::move(store)},
            {"services", std::move(svc)}}},
          {"catalog", catalog_to_json(catalog)}};
}

void Engine::Impl::load_snapshot(const ojson& snap, bool from_resume) {
  using namespace detail;
  try {
    const json s = json::parse(snap.dump());
    const json& in = require(s, "instance", "snapshot");
    const json& run = require(s, "runtime", "snapshot");

    for (const auto& [id, st] : require(in, "activity_states", "instance").items()) {
      auto it = inst.activity_states.find(id);
      if (it == inst.activity_states.end()) shape_error("instance.activity_states", "unknown activity '" + id + "'");
      auto status = parse_status(get_string(st, "status", id));
      if (!status) shape_error(id, "unknown status");
      it->second.status = *status;
      it->second.attempt_count = static_cast<int>(get_int(st, "attempt_count", id));
      it->second.started_at = read_time(st, "started_at");
      it->second.ended_at = read_time(st, "ended_at");
    }
    inst.variable_values.clear();
    for (const auto& [name, v] : require(in, "variables", "instance").items()) {
      inst.variable_values[name] = value_from_json(v, name);
    }
    inst.bindings.clear();
    for (const auto& [id, b] : require(in, "bindings", "instance").items()) {
      BindingDecision d;
      d.activity_id = id;
      d.candidates = require(b, "candidates", id).get<std::vector<std::string>>();
      d.chosen = get_string(b, "chosen", id);
      d.decided_at = get_number(b, "decided_at", id);
      inst.bindings[id] = std::move(d);
    }
    inst.loop_counters.clear();
    for (const auto& [id, n] : require(in, "loop_counters", "instance").items()) {
      inst.loop_counters[id] = static_cast<int>(as_int(n, id));
    }

    for (auto& [id, r] : rt) {
      r.serial = 0;
      r.rebinds_used = 0;
      r.tried.clear();
      r.last_service.clear();
      r.retry_same_service.reset();
      r.rebind_pending = false;
      r.units.clear();
      ++r.timer_gen;
    }
    for (const auto& [id, a] : require(run, "activities", "runtime").items()) {
      auto it = rt.find(id);
      if (it == rt.end()) shape_error("runtime.activities", "unknown activity '" + id + "'");
      it->second.serial = static_cast<int>(get_int(a, "serial", id));
      it->second.rebinds_used = static_cast<int>(get_int(a, "rebinds_used", id));
      const auto tried = require(a, "tried", id).get<std::vector<std::string>>();
      it->second.tried = {tried.begin(), tried.end()};
      it->second.last_service = get_string(a, "last_service", id);
    }
    completion_order = require(run, "completion_order", "runtime").get<std::vector<std::string>>();
    completions = static_cast<int>(get_int(run, "completions", "runtime"));
    mailbox.clear();
    for (const auto& [name, n] : require(run, "mailbox", "runtime").items()) mailbox[name] = static_cast<int>(as_int(n, name));

    const json& cl = require(run, "cleanup", "runtime");
    plan.triggers.clear();
    for (const auto& [lfn, ids] : require(cl, "triggers", "cleanup").items()) {
      const auto v = ids.get<std::vector<std::string>>();
      plan.triggers[lfn] = {v.begin(), v.end()};
    }
    const auto c = require(cl, "cleaned", "cleanup").get<std::vector<std::string>>();
    cleaned = {c.begin(), c.end()};

    provenance.clear();
    provenance_index.clear();
    for (const auto& p : expect_array(require(run, "provenance", "runtime"), "runtime.provenance")) {
      provenance_index[p.at("lfn").get<std::string>()] = provenance.size();
      provenance.push_back(provenance_from_json(p));
    }

    const auto base = MonitoringSnapshot::from_registry(env.registry);
    stats = base;
    if (const auto* svc = optional_field(run, "services")) {
      for (const auto& [id, st] : svc->items()) {
        auto& e = stats.services[id];
        e.load = base.stats(id).load;
        e.successes = get_int(st, "successes", id);
        e.failures = get_int(st, "failures", id);
      }
    }

    if (from_resume) {
      pending_messages.clear();
      for (const auto& m : expect_array(require(run, "pending_messages", "runtime"), "pending_messages")) {
        pending_messages.emplace_back(m.at(0).get<std::string>(), m.at(1).get<double>());
      }
      for (const auto& [name, at] : env.messages) pending_messages.emplace_back(name, std::max(at, now()));
      checkpoint_counter = static_cast<int>(get_int(run, "checkpoint_counter", "runtime"));
      epoch = get_uint(run, "epoch", "runtime");
      stored.clear();
      for (const auto& [lfn, bytes] : require(run, "stored", "runtime").items()) stored[lfn] = as_uint(bytes, lfn);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("snapshot: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptCheckpoint) throw;
    throw Error(ErrorCode::CorruptCheckpoint, std::string("snapshot: ") + e.what());
  }
}

}  // namespace gridflow
