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

#include "replayer.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gridflow::testing {

using nlohmann::json;

namespace {

// The activity diagram, written out independently of the engine.
const std::set<std::pair<std::string, std::string>> kEdges = {
    {"Inactive", "Ready"},       {"Inactive", "DeadPath"},      {"Ready", "Executing"},
    {"Ready", "Faulted"},        {"Executing", "Finished"},     {"Executing", "Faulted"},
    {"Faulted", "Ready"},        {"Finished", "Compensating"},  {"Compensating", "Compensated"},
};
// Loop-body resets, legal only below a While.
const std::set<std::pair<std::string, std::string>> kResetEdges = {{"Finished", "Inactive"}, {"DeadPath", "Inactive"}};

struct Model {
  std::map<std::string, bool> in_loop;
  std::map<std::string, std::vector<std::string>> inputs;
  std::map<std::string, int> replication;
  std::map<std::string, std::set<std::string>> consumers;
  std::string root;
};

Model build_model(const Workflow& w) {
  Model m;
  m.root = w.root.id;
  auto default_k = 1;
  for (const auto& p : w.default_policy_chain) {
    if (const auto* r = std::get_if<ReplicatePolicy>(&p)) {
      default_k = r->k;
      break;
    }
  }
  std::function<void(const Activity&, bool)> walk = [&](const Activity& a, bool loop) {
    m.in_loop[a.id] = loop;
    if (a.kind == ActivityKind::Invoke) {
      m.inputs[a.id] = a.inputs;
      int k = 0;
      for (const auto& p : a.policy_chain) {
        if (const auto* r = std::get_if<ReplicatePolicy>(&p)) {
          k = r->k;
          break;
        }
      }
      m.replication[a.id] = k ? k : default_k;
      for (const auto& lfn : a.inputs) m.consumers[lfn].insert(a.id);
    }
    for (const auto& c : a.children) walk(c, loop || a.kind == ActivityKind::While);
  };
  walk(w.root, false);
  return m;
}

class Replayer {
 public:
  Replayer(const Workflow& w, const Grid& g) : model_(build_model(w)), grid_(g) {
    visit_activities(w, [&](const Activity& a, const Activity*) { initial_[a.id] = "Inactive"; });
    reset_process();
  }

  void line(const json& l) {
    ++out_.lines;
    const auto seq = l.at("seq").get<std::int64_t>();
    const auto t = l.at("t").get<double>();
    const auto kind = l.at("kind").get<std::string>();
    const auto& subject = l.at("subject").get_ref<const std::string&>();
    const json& d = l.at("detail");

    const bool resumed = kind == "CheckpointRestored" && d.value("resumed", false);
    if (resumed) {
      reset_process();
      // A resumed process restarts at the checkpoint time.
      last_t_ = d.at("at").get<double>();
    }
    if (last_seq_ && seq != *last_seq_ + 1) flag(ordering, "seq " + std::to_string(seq) + " does not follow " + std::to_string(*last_seq_));
    if (t < last_t_) flag(ordering, "time goes back at seq " + std::to_string(seq));
    last_seq_ = seq;
    last_t_ = t;
    if (terminated_ && !resumed) flag(ordering, "line after InstanceTerminated at seq " + std::to_string(seq));

    if (d.contains("ops")) ops(d.at("ops"), kind, seq);

    if (kind == "TaskFailed") {
      const auto level = parse_level(d.at("level").get<std::string>());
      if (!level) throw std::runtime_error("unknown level in log");
      auto& c = report_.faults[*level];
      const bool injected = d.at("injected").get<bool>();
      if (injected) {
        ++c.injected;
        if (d.at("detected").get<bool>()) ++c.detected;
      } else {
        ++c.raised;
      }
      const auto res = d.value("resolution", std::string{});
      if (res == "retry") ++report_.retries;
      if (res == "rebind") ++report_.rebinds;
      if (d.value("kind", std::string{}) == "InputUnavailable" && d.contains("lfn")) {
        const auto lfn = d.at("lfn").get<std::string>();
        if (cleaned_.count(lfn)) flag(cleanup, "InputUnavailable for cleaned " + lfn + " at seq " + std::to_string(seq));
      }
    } else if (kind == "CheckpointTaken") {
      if (!d.contains("error")) ++report_.checkpoints_taken;
    } else if (kind == "CheckpointRestored") {
      ++report_.restores;
      terminated_ = false;
      for (const auto& [id, s] : d.at("states").items()) states_[id] = s.get<std::string>();
    } else if (kind == "AlertFired") {
      ++report_.alerts;
    } else if (kind == "CleanupDone") {
      if (!d.contains("ops")) flag(cleanup, "CleanupDone without removals for " + subject);
    } else if (kind == "InstanceTerminated") {
      terminated_ = true;
      report_.state = parse_state(d.at("state").get<std::string>());
      report_.deadlock = d.at("deadlock").get<bool>();
      report_.makespan = d.at("makespan").get<double>();
      if (report_.state == ProcessState::Completed && states_[model_.root] != "Finished") {
        flag(ordering, "Completed with root " + states_[model_.root]);
      }
    }

    if (d.contains("ops_after")) ops(d.at("ops_after"), kind, seq);
  }

  ReplayResult finish() {
    for (const auto& s : grid_.sites()) report_.peak_storage[s.site_id] = peak_[s.site_id];
    out_.recount = report_;
    out_.terminated = terminated_;
    out_.final_states = states_;
    if (terminated_ && report_.state == ProcessState::Completed) {
      for (const auto& [id, s] : states_) {
        if (s != "Finished" && s != "DeadPath") flag(ordering, "activity " + id + " ends " + s + " in a Completed run");
      }
    }
    return std::move(out_);
  }

 private:
  enum Category { transition, cleanup, slot, storage, ordering };

  static ProcessState parse_state(const std::string& s) {
    if (s == "Completed") return ProcessState::Completed;
    if (s == "Faulted") return ProcessState::Faulted;
    if (s == "Compensated") return ProcessState::Compensated;
    if (s == "Running") return ProcessState::Running;
    throw std::runtime_error("unknown process state " + s);
  }

  void flag(Category c, std::string what) {
    switch (c) {
      case transition: ++out_.illegal_transitions; break;
      case cleanup: ++out_.cleanup_violations; break;
      case slot: ++out_.slot_violations; break;
      case storage: ++out_.storage_violations; break;
      case ordering: ++out_.ordering_violations; break;
    }
    out_.violations.push_back(std::move(what));
  }

  void reset_process() {
    running_.clear();
    files_.clear();
    used_.clear();
    peak_.clear();
    cleaned_.clear();
    store_ = 0;
    report_ = RunReport{};
    states_ = initial_;
    terminated_ = false;
  }

  void ops(const json& list, const std::string& kind, std::int64_t seq) {
    const std::string at = " at seq " + std::to_string(seq);
    for (const auto& op : list) {
      const auto name = op.at(0).get<std::string>();
      if (name == "T") {
        const auto id = op.at(1).get<std::string>();
        const auto from = op.at(2).get<std::string>();
        const auto to = op.at(3).get<std::string>();
        auto it = states_.find(id);
        if (it == states_.end()) {
          flag(transition, "unknown activity " + id + at);
          continue;
        }
        if (it->second != from) {
          flag(transition, id + " is " + it->second + " but the log moves it from " + from + at);
        }
        const bool ok = kEdges.count({from, to}) || (kResetEdges.count({from, to}) && model_.in_loop[id]);
        if (!ok) flag(transition, id + ": " + from + " -> " + to + at);
        it->second = to;
      } else if (name == "acquire" || name == "release") {
        const auto site = op.at(1).get<std::string>();
        const auto* s = grid_.site(site);
        if (!s) {
          flag(slot, "slot op on unknown site " + site + at);
          continue;
        }
        int& n = running_[site];
        n += name == "acquire" ? 1 : -1;
        if (n > s->slots) flag(slot, site + " runs " + std::to_string(n) + " > " + std::to_string(s->slots) + at);
        if (n < 0) flag(slot, site + " released more slots than acquired" + at);
      } else if (name == "add") {
        const auto site = op.at(1).get<std::string>();
        const auto lfn = op.at(2).get<std::string>();
        const auto bytes = op.at(3).get<std::uint64_t>();
        const auto* s = grid_.site(site);
        if (!s) {
          flag(storage, "add on unknown site " + site + at);
          continue;
        }
        if (!files_[site].emplace(lfn, bytes).second) flag(storage, lfn + " added twice at " + site + at);
        used_[site] += bytes;
        if (used_[site] > s->storage_capacity_bytes) flag(storage, site + " over capacity" + at);
        peak_[site] = std::max(peak_[site], used_[site]);
        cleaned_.erase(lfn);
      } else if (name == "remove") {
        const auto site = op.at(1).get<std::string>();
        const auto lfn = op.at(2).get<std::string>();
        const auto bytes = op.at(3).get<std::uint64_t>();
        auto f = files_[site].find(lfn);
        if (f == files_[site].end()) {
          flag(storage, "remove of absent " + lfn + " at " + site + at);
          continue;
        }
        if (f->second != bytes) flag(storage, "remove of " + lfn + " frees the wrong size" + at);
        files_[site].erase(f);
        if (used_[site] < bytes) {
          flag(storage, site + " goes negative" + at);
          used_[site] = 0;
        } else {
          used_[site] -= bytes;
        }
        if (kind == "CleanupDone") {
          for (const auto& c : model_.consumers[lfn]) {
            const auto& s = states_[c];
            if (s != "Finished" && s != "DeadPath") flag(cleanup, lfn + " cleaned while consumer " + c + " is " + s + at);
          }
          bool anywhere = false;
          for (const auto& [site_id, held] : files_) anywhere = anywhere || held.count(lfn);
          if (!anywhere) cleaned_.insert(lfn);
        }
      } else if (name == "store") {
        store_ += op.at(2).get<std::uint64_t>();
      } else if (name == "dispatch") {
        const auto id = op.at(1).get<std::string>();
        for (const auto& lfn : model_.inputs[id]) {
          if (cleaned_.count(lfn)) flag(cleanup, id + " dispatched after " + lfn + " was cleaned" + at);
        }
        if (model_.replication[id] > 1) ++report_.replicas_launched;
      } else {
        flag(ordering, "unknown op " + name + at);
      }
    }
  }

  Model model_;
  const Grid& grid_;
  std::map<std::string, std::string> initial_;
  std::map<std::string, std::string> states_;
  std::map<std::string, int> running_;
  std::map<std::string, std::map<std::string, std::uint64_t>> files_;
  std::map<std::string, std::uint64_t> used_;
  std::map<std::string, std::uint64_t> peak_;
  std::set<std::string> cleaned_;
  std::uint64_t store_ = 0;
  RunReport report_;
  std::optional<std::int64_t> last_seq_;
  double last_t_ = 0.0;
  bool terminated_ = false;
  ReplayResult out_;
};

}  // namespace

ReplayResult replay(const std::vector<json>& lines, const Workflow& w, const Grid& grid) {
  Replayer r(w, grid);
  for (const auto& l : lines) r.line(l);
  return r.finish();
}

ReplayResult replay(const std::vector<EngineEvent>& log, const Workflow& w, const Grid& grid) {
  std::vector<json> lines;
  lines.reserve(log.size());
  for (const auto& e : log) lines.push_back(json::parse(event_line(e)));
  return replay(lines, w, grid);
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

bool same_counts(const RunReport& a, const RunReport& b, std::string* why) {
  auto fail = [&](const std::string& what) {
    if (why) *why = what;
    return false;
  };
  if (a.state != b.state) return fail("state");
  if (a.deadlock != b.deadlock) return fail("deadlock");
  if (a.makespan != b.makespan) return fail("makespan");
  for (FaultLevel level : kFaultLevels) {
    LevelCounts x;
    LevelCounts y;
    if (auto it = a.faults.find(level); it != a.faults.end()) x = it->second;
    if (auto it = b.faults.find(level); it != b.faults.end()) y = it->second;
    if (x.injected != y.injected || x.detected != y.detected || x.raised != y.raised) {
      return fail("fault counts at level " + std::string(level_name(level)));
    }
  }
  if (a.retries != b.retries) return fail("retries");
  if (a.rebinds != b.rebinds) return fail("rebinds");
  if (a.replicas_launched != b.replicas_launched) return fail("replicas_launched");
  if (a.checkpoints_taken != b.checkpoints_taken) return fail("checkpoints_taken");
  if (a.restores != b.restores) return fail("restores");
  if (a.alerts != b.alerts) return fail("alerts");
  if (a.peak_storage != b.peak_storage) return fail("peak_storage");
  return true;
}

std::vector<std::string> dispatch_schedule(const std::vector<EngineEvent>& log) {
  std::vector<std::string> out;
  for (const auto& e : log) {
    for (const char* key : {"ops", "ops_after"}) {
      if (!e.detail.contains(key)) continue;
      for (const auto& op : e.detail[key]) {
        if (op.at(0) != "dispatch") continue;
        out.push_back(nlohmann::json(e.at).dump() + " " + op.dump());
      }
    }
  }
  return out;
}

}  // namespace gridflow::testing
