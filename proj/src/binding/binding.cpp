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

#include "gridflow/binding.hpp"

#include <algorithm>
#include <deque>
#include <functional>

#include "common/json_util.hpp"
#include "gridflow/error.hpp"

namespace gridflow {

using detail::json;

ConceptHierarchy::ConceptHierarchy(std::set<std::string> concepts,
                                   std::vector<std::pair<std::string, std::string>> is_a)
    : concepts_(std::move(concepts)), is_a_(std::move(is_a)) {
  for (const auto& [child, parent] : is_a_) {
    if (!concepts_.count(child) || !concepts_.count(parent)) {
      throw Error(ErrorCode::InvalidHierarchy, "is_a edge " + child + " -> " + parent + " names an undeclared concept");
    }
    parents_[child].push_back(parent);
  }
  // Kahn over child->parent edges; leftovers sit on a cycle.
  std::map<std::string, int> indegree;
  for (const auto& c : concepts_) indegree[c] = 0;
  for (const auto& [child, parent] : is_a_) ++indegree[parent];
  std::deque<std::string> ready;
  for (const auto& [c, d] : indegree) {
    if (d == 0) ready.push_back(c);
  }
  std::size_t seen = 0;
  while (!ready.empty()) {
    const auto c = ready.front();
    ready.pop_front();
    ++seen;
    if (auto it = parents_.find(c); it != parents_.end()) {
      for (const auto& p : it->second) {
        if (--indegree[p] == 0) ready.push_back(p);
      }
    }
  }
  if (seen != concepts_.size()) throw Error(ErrorCode::InvalidHierarchy, "is_a graph has a cycle");
}

std::set<std::string> ConceptHierarchy::ancestors(std::string_view concept_name) const {
  std::set<std::string> seen{std::string(concept_name)};
  std::deque<std::string> frontier{std::string(concept_name)};
  while (!frontier.empty()) {
    const auto c = frontier.front();
    frontier.pop_front();
    auto it = parents_.find(c);
    if (it == parents_.end()) continue;
    for (const auto& p : it->second) {
      if (seen.insert(p).second) frontier.push_back(p);
    }
  }
  return seen;
}

ConceptHierarchy load_hierarchy(std::string_view text) {
  const json doc = detail::parse_text(text);
  std::set<std::string> concepts;
  for (const auto& c : detail::expect_array(detail::require(doc, "concepts", "hierarchy"), "concepts")) {
    concepts.insert(detail::as_string(c, "concepts"));
  }
  std::vector<std::pair<std::string, std::string>> edges;
  if (const auto* is_a = detail::optional_field(doc, "is_a")) {
    for (const auto& e : detail::expect_array(*is_a, "is_a")) {
      if (!e.is_array() || e.size() != 2) detail::shape_error("is_a", "edges are [child, parent] pairs");
      edges.emplace_back(detail::as_string(e[0], "is_a"), detail::as_string(e[1], "is_a"));
    }
  }
  return ConceptHierarchy(std::move(concepts), std::move(edges));
}

bool matches_concept(const ConceptHierarchy& h, std::string_view offered, std::string_view requested) {
  for (auto c : {offered, requested}) {
    if (!h.contains(c)) throw Error(ErrorCode::UnknownConcept, "concept '" + std::string(c) + "' is not declared");
  }
  if (offered == requested) return true;
  return h.ancestors(offered).count(std::string(requested)) > 0;
}

namespace {

bool service_offers(const ConceptHierarchy* h, const ServiceDescriptor& s, const std::string& concept_name) {
  for (const auto& cap : s.capabilities) {
    if (cap == concept_name) return true;
    if (h && h->contains(cap) && h->contains(concept_name) && matches_concept(*h, cap, concept_name)) return true;
  }
  return false;
}

}  // namespace

Registry load_registry(std::string_view text) {
  const json doc = detail::parse_text(text);
  Registry out;
  std::set<std::string> ids;
  for (const auto& s : detail::expect_array(doc, "registry")) {
    ServiceDescriptor d;
    const std::string ctx = "registry";
    d.service_id = detail::get_string(s, "service_id", ctx);
    d.port_type = detail::get_string(s, "port_type", ctx);
    d.site = detail::get_string(s, "site", ctx);
    d.mean_exec_seconds = detail::get_number(s, "mean_exec_seconds", ctx);
    if (const auto* caps = detail::optional_field(s, "capabilities")) {
      for (const auto& c : detail::expect_array(*caps, ctx + ".capabilities")) {
        d.capabilities.insert(detail::as_string(c, ctx + ".capabilities"));
      }
    }
    if (const auto* j = detail::optional_field(s, "exec_jitter_fraction")) d.exec_jitter_fraction = detail::as_number(*j, ctx);
    if (const auto* up = detail::optional_field(s, "uptime_history")) {
      for (const auto& iv : detail::expect_array(*up, ctx + ".uptime_history")) {
        if (!iv.is_array() || iv.size() != 2) detail::shape_error(ctx + ".uptime_history", "intervals are [start, end]");
        d.uptime_history.push_back({detail::as_number(iv[0], ctx), detail::as_number(iv[1], ctx)});
      }
    }
    if (const auto* v = detail::optional_field(s, "current_load")) d.current_load = detail::as_int(*v, ctx);
    if (const auto* v = detail::optional_field(s, "success_count")) d.success_count = detail::as_int(*v, ctx);
    if (const auto* v = detail::optional_field(s, "failure_count")) d.failure_count = detail::as_int(*v, ctx);

    const std::string who = "service '" + d.service_id + "'";
    if (!ids.insert(d.service_id).second) throw Error(ErrorCode::InvalidRegistry, who + " is listed twice");
    if (!(d.mean_exec_seconds > 0)) throw Error(ErrorCode::InvalidRegistry, who + ": mean_exec_seconds must be > 0");
    if (d.exec_jitter_fraction < 0 || d.exec_jitter_fraction >= 1) {
      throw Error(ErrorCode::InvalidRegistry, who + ": exec_jitter_fraction must lie in [0, 1)");
    }
    if (d.current_load < 0 || d.success_count < 0 || d.failure_count < 0) {
      throw Error(ErrorCode::InvalidRegistry, who + ": counters must be non-negative");
    }
    for (std::size_t i = 0; i < d.uptime_history.size(); ++i) {
      const auto& iv = d.uptime_history[i];
      if (iv.end < iv.start || (i > 0 && iv.start < d.uptime_history[i - 1].end)) {
        throw Error(ErrorCode::InvalidRegistry, who + ": uptime intervals must be sorted and disjoint");
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

nlohmann::ordered_json registry_to_json(const Registry& registry) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& d : registry) {
    nlohmann::ordered_json j;
    j["service_id"] = d.service_id;
    j["port_type"] = d.port_type;
    j["capabilities"] = std::vector<std::string>(d.capabilities.begin(), d.capabilities.end());
    j["site"] = d.site;
    j["mean_exec_seconds"] = d.mean_exec_seconds;
    j["exec_jitter_fraction"] = d.exec_jitter_fraction;
    nlohmann::ordered_json up = nlohmann::ordered_json::array();
    for (const auto& iv : d.uptime_history) up.push_back({iv.start, iv.end});
    j["uptime_history"] = up;
    j["current_load"] = d.current_load;
    j["success_count"] = d.success_count;
    j["failure_count"] = d.failure_count;
    arr.push_back(std::move(j));
  }
  return arr;
}

const ServiceDescriptor* find_service(const Registry& registry, std::string_view service_id) {
  for (const auto& s : registry) {
    if (s.service_id == service_id) return &s;
  }
  return nullptr;
}

bool operational_throughout(std::span<const UptimeInterval> history, double from, double to) {
  double covered = from;
  for (const auto& iv : history) {
    if (iv.start > covered) break;
    covered = std::max(covered, iv.end);
    if (covered >= to) return true;
  }
  return covered >= to && !history.empty();
}

MonitoringSnapshot MonitoringSnapshot::from_registry(const Registry& registry) {
  MonitoringSnapshot snap;
  for (const auto& s : registry) {
    snap.services[s.service_id] = ServiceStats{s.current_load, s.success_count, s.failure_count};
  }
  return snap;
}

ServiceStats MonitoringSnapshot::stats(std::string_view service_id) const {
  auto it = services.find(std::string(service_id));
  return it == services.end() ? ServiceStats{} : it->second;
}

bool ranks_before(const std::string& a, const std::string& b, const MonitoringSnapshot& snapshot) {
  const auto sa = snapshot.stats(a);
  const auto sb = snapshot.stats(b);
  if (sa.load != sb.load) return sa.load < sb.load;
  // failures/(successes+failures+1), compared exactly by cross-multiplication.
  const auto lhs = static_cast<__int128>(sa.failures) * (sb.successes + sb.failures + 1);
  const auto rhs = static_cast<__int128>(sb.failures) * (sa.successes + sa.failures + 1);
  if (lhs != rhs) return lhs < rhs;
  return a < b;
}

std::vector<std::string> find_candidates(const Registry& registry, std::string_view port_type,
                                         const MatchRules& rules, double now, const ConceptHierarchy* hierarchy) {
  std::vector<std::string> out;
  for (const auto& s : registry) {
    if (s.port_type != port_type) continue;
    if (rules.required_concept && !service_offers(hierarchy, s, *rules.required_concept)) continue;
    if (rules.max_expected_seconds && s.mean_exec_seconds > *rules.max_expected_seconds) continue;
    if (rules.reliability_window_seconds &&
        !operational_throughout(s.uptime_history, now - *rules.reliability_window_seconds, now)) {
      continue;
    }
    out.push_back(s.service_id);
  }
  const auto snapshot = MonitoringSnapshot::from_registry(registry);
  std::sort(out.begin(), out.end(),
            [&](const std::string& a, const std::string& b) { return ranks_before(a, b, snapshot); });
  return out;
}

std::string bind(std::span<const std::string> candidates, const MonitoringSnapshot& snapshot) {
  if (candidates.empty()) throw Error(ErrorCode::NoCandidates, "no service candidates to bind");
  const std::string* best = &candidates.front();
  for (const auto& c : candidates) {
    if (ranks_before(c, *best, snapshot)) best = &c;
  }
  return *best;
}

namespace {

PortTypeChoice choose_port_type(const Activity& a, const ConceptHierarchy& h, const Registry& registry) {
  const auto& concept_name = a.binding.target;
  std::map<std::string, std::vector<std::string>> by_port;
  for (const auto& s : registry) {
    if (service_offers(&h, s, concept_name)) by_port[s.port_type].push_back(s.service_id);
  }
  if (by_port.empty()) throw NoMatchingPortTypeError(a.id, concept_name);

  // std::map iterates names ascending, so strict '>' keeps the smallest name on ties.
  const std::pair<const std::string, std::vector<std::string>>* best = nullptr;
  for (const auto& entry : by_port) {
    if (!best || entry.second.size() > best->second.size()) best = &entry;
  }
  PortTypeChoice choice{a.id, concept_name, best->first, {}};
  MatchRules rules;
  rules.required_concept = concept_name;
  choice.candidates = find_candidates(registry, best->first, rules, 0.0, &h);
  return choice;
}

void rewrite(Activity& a, const ConceptHierarchy& h, const Registry& registry, std::vector<PortTypeChoice>& choices) {
  if (a.kind == ActivityKind::Invoke && a.binding.kind == Binding::Kind::Abstract) {
    auto choice = choose_port_type(a, h, registry);
    a.binding = Binding::port_type(choice.port_type);
    choices.push_back(std::move(choice));
  }
  for (auto& c : a.children) rewrite(c, h, registry, choices);
}

}  // namespace

ConcreteResult generate_concrete_with_report(const Workflow& w, const ConceptHierarchy& h, const Registry& registry) {
  ConcreteResult result{w, {}};
  rewrite(result.workflow.root, h, registry, result.choices);
  return result;
}

Workflow generate_concrete(const Workflow& w, const ConceptHierarchy& h, const Registry& registry) {
  return generate_concrete_with_report(w, h, registry).workflow;
}

bool has_abstract_bindings(const Workflow& w) {
  bool found = false;
  visit_activities(w, [&](const Activity& a, const Activity*) {
    if (a.kind == ActivityKind::Invoke && a.binding.kind == Binding::Kind::Abstract) found = true;
  });
  return found;
}

}  // namespace gridflow
