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

// Concrete workflow generation (concept -> port type) and runtime service
// find-and-bind (port type -> service instance).

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridflow/workflow.hpp"
#include "json.hpp"

namespace gridflow {

class ConceptHierarchy {
 public:
  ConceptHierarchy() = default;
  // Throws InvalidHierarchy on a dangling endpoint or an is-a cycle.
  ConceptHierarchy(std::set<std::string> concepts, std::vector<std::pair<std::string, std::string>> is_a);

  const std::set<std::string>& concepts() const noexcept { return concepts_; }
  const std::vector<std::pair<std::string, std::string>>& is_a() const noexcept { return is_a_; }
  bool contains(std::string_view concept_name) const { return concepts_.count(std::string(concept_name)) > 0; }

  // All concepts reachable from `concept_name` over is-a edges, itself included.
  std::set<std::string> ancestors(std::string_view concept_name) const;

 private:
  std::set<std::string> concepts_;
  std::vector<std::pair<std::string, std::string>> is_a_;
  std::map<std::string, std::vector<std::string>> parents_;
};

// {"concepts": [...], "is_a": [["child","parent"], ...]}
ConceptHierarchy load_hierarchy(std::string_view text);

// True iff `offered` equals `requested` or specializes it. Throws UnknownConcept.
bool matches_concept(const ConceptHierarchy& h, std::string_view offered, std::string_view requested);

struct UptimeInterval {
  double start = 0.0;
  double end = 0.0;
  bool operator==(const UptimeInterval&) const = default;
};

struct ServiceDescriptor {
  std::string service_id;
  std::string port_type;
  std::set<std::string> capabilities;
  std::string site;
  double mean_exec_seconds = 1.0;
  double exec_jitter_fraction = 0.0;
  std::vector<UptimeInterval> uptime_history;  // epoch seconds, sorted, disjoint
  std::int64_t current_load = 0;
  std::int64_t success_count = 0;
  std::int64_t failure_count = 0;

  bool operator==(const ServiceDescriptor&) const = default;
};

using Registry = std::vector<ServiceDescriptor>;

// JSON array of descriptor objects; uptime_history entries are [start, end].
Registry load_registry(std::string_view text);
nlohmann::ordered_json registry_to_json(const Registry& registry);
const ServiceDescriptor* find_service(const Registry& registry, std::string_view service_id);

inline constexpr double kDefaultMaxExpectedSeconds = 3600.0;       // "complete within 1h"
inline constexpr double kDefaultReliabilityWindowSeconds = 259200.0;  // "operational during the last 72h"

struct MatchRules {
  std::optional<std::string> required_concept;
  std::optional<double> max_expected_seconds;
  std::optional<double> reliability_window_seconds;

  static MatchRules defaults() {
    return MatchRules{std::nullopt, kDefaultMaxExpectedSeconds, kDefaultReliabilityWindowSeconds};
  }
};

bool operational_throughout(std::span<const UptimeInterval> history, double from, double to);

// Services of `port_type` satisfying every present rule, ranked by
// (current_load, failure ratio, service_id). `hierarchy` is only consulted
// when a concept rule is present.
std::vector<std::string> find_candidates(const Registry& registry, std::string_view port_type,
                                         const MatchRules& rules, double now,
                                         const ConceptHierarchy* hierarchy = nullptr);

struct ServiceStats {
  std::int64_t load = 0;
  std::int64_t successes = 0;
  std::int64_t failures = 0;
};

struct MonitoringSnapshot {
  std::map<std::string, ServiceStats> services;  // missing entries read as zero

  static MonitoringSnapshot from_registry(const Registry& registry);
  ServiceStats stats(std::string_view service_id) const;
};

// Strict weak order of the ranking key under `snapshot`.
bool ranks_before(const std::string& a, const std::string& b, const MonitoringSnapshot& snapshot);

// First candidate under the ranking. Throws NoCandidates.
std::string bind(std::span<const std::string> candidates, const MonitoringSnapshot& snapshot);

struct BindingDecision {
  std::string activity_id;
  std::vector<std::string> candidates;
  std::string chosen;
  double decided_at = 0.0;
  bool operator==(const BindingDecision&) const = default;
};

struct PortTypeChoice {
  std::string activity_id;
  std::string concept_name;
  std::string port_type;
  std::vector<std::string> candidates;  // services of the chosen port type matching the concept
};

struct ConcreteResult {
  Workflow workflow;
  std::vector<PortTypeChoice> choices;
};

// Rewrites every Abstract binding to the port type with the most matching
// services (ties: smallest name). Throws NoMatchingPortTypeError.
ConcreteResult generate_concrete_with_report(const Workflow& w, const ConceptHierarchy& h, const Registry& registry);
Workflow generate_concrete(const Workflow& w, const ConceptHierarchy& h, const Registry& registry);

bool has_abstract_bindings(const Workflow& w);

}  // namespace gridflow
