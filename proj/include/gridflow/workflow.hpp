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

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gridflow/fault.hpp"
#include "json.hpp"

namespace gridflow {

using Value = std::variant<bool, std::int64_t, std::string>;

enum class ValueType { Bool, Int, String };

std::string_view type_name(ValueType type);
ValueType type_of(const Value& value);
std::string to_string(const Value& value);
Value value_from_json(const nlohmann::json& j, std::string_view ctx);
nlohmann::ordered_json value_to_json(const Value& v);

struct Variable {
  std::string name;
  ValueType type = ValueType::Int;
  Value init = std::int64_t{0};
  bool operator==(const Variable&) const = default;
};

struct DataRef {
  std::string lfn;
  std::uint64_t size_bytes = 0;
  bool operator==(const DataRef&) const = default;
};

// Comparison of a variable against a literal, or a boolean combination.
struct Condition {
  enum class Op { Eq, Ne, Lt, Le, Gt, Ge, And, Or, Not };

  Op op = Op::Eq;
  std::string variable;
  Value literal = std::int64_t{0};
  std::vector<Condition> operands;  // And/Or: two or more; Not: exactly one

  bool operator==(const Condition&) const = default;

  static Condition compare(Op op, std::string variable, Value literal);
  static Condition all_of(std::vector<Condition> operands);
  static Condition any_of(std::vector<Condition> operands);
  static Condition negate(Condition operand);

  bool is_comparison() const noexcept { return op != Op::And && op != Op::Or && op != Op::Not; }
};

using VariableMap = std::map<std::string, Value>;

// Total: a missing variable or a type mismatch makes a comparison false
// (and `!=` true).
bool evaluate(const Condition& condition, const VariableMap& variables);

void collect_variables(const Condition& condition, std::set<std::string>& out);

enum class ActivityKind { Invoke, Sequence, Flow, If, While, Wait, Receive };

std::string_view kind_name(ActivityKind kind);
std::optional<ActivityKind> parse_activity_kind(std::string_view name);

struct Binding {
  enum class Kind { Abstract, PortType, Bound };
  Kind kind = Kind::PortType;
  std::string target;  // concept name, port type name, or service id

  bool operator==(const Binding&) const = default;

  static Binding abstract(std::string concept_name) { return {Kind::Abstract, std::move(concept_name)}; }
  static Binding port_type(std::string name) { return {Kind::PortType, std::move(name)}; }
  static Binding bound(std::string service_id) { return {Kind::Bound, std::move(service_id)}; }
};

struct OutputSpec {
  std::string lfn;
  std::uint64_t size_bytes = 0;
  bool operator==(const OutputSpec&) const = default;
};

struct Assignment {
  std::string variable;
  Value value = std::int64_t{0};
  bool operator==(const Assignment&) const = default;
};

struct Activity {
  std::string id;
  ActivityKind kind = ActivityKind::Sequence;

  // Invoke
  Binding binding;
  std::vector<std::string> inputs;
  std::vector<OutputSpec> outputs;
  std::optional<Assignment> sets;
  std::vector<Policy> policy_chain;
  std::optional<double> deadline;  // seconds

  // Sequence/Flow: children in order. If: {then, else?}. While: {body}.
  // Invoke: {compensation handler?}.
  std::vector<Activity> children;

  // If/While
  std::optional<Condition> condition;
  int max_iterations = 1;

  // Wait
  double duration = 0.0;

  // Receive
  std::string message_name;

  bool operator==(const Activity&) const = default;

  const Activity* then_branch() const;
  const Activity* else_branch() const;
  const Activity* body() const;
  const Activity* compensation() const;

  // Structural children, excluding an invoke's compensation handler.
  std::span<const Activity> structural_children() const;
};

struct Workflow {
  std::string id;
  Activity root;
  std::vector<Variable> variables;
  std::vector<DataRef> files;
  std::set<std::string> final_outputs;
  std::vector<Policy> default_policy_chain;

  bool operator==(const Workflow&) const = default;

  const DataRef* find_file(std::string_view lfn) const;
};

// Calls `fn(activity, parent)` in document order for every activity,
// compensation handlers included (visited right after their owner).
template <class Fn>
void visit_activities(const Activity& activity, const Activity* parent, Fn&& fn) {
  fn(activity, parent);
  for (const auto& child : activity.children) visit_activities(child, &activity, fn);
}

template <class Fn>
void visit_activities(const Workflow& w, Fn&& fn) {
  visit_activities(w.root, nullptr, fn);
}

std::vector<const Activity*> invokes_of(const Workflow& w);

// ---------------------------------------------------------------------------
// Document format

Workflow parse_workflow(std::string_view document_text);
Workflow workflow_from_json(const nlohmann::json& document);
nlohmann::ordered_json workflow_to_json(const Workflow& w);
std::string serialize_workflow(const Workflow& w);

Condition condition_from_json(const nlohmann::json& j);
nlohmann::ordered_json condition_to_json(const Condition& c);

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  enum class Kind {
    DuplicateId,
    UndeclaredFile,
    UndeclaredVariable,
    CyclicDataDependency,
    UnproducedFinalOutput,
    MultiProducer,
    AbstractWithoutConcept,
    OutputSizeMismatch,
    InputOutputOverlap,
    InvalidLoopBound,
  };
  Kind kind;
  std::string subject;  // activity id, lfn or variable name
  std::string message;

  bool operator==(const Violation&) const = default;
};

std::string_view violation_name(Violation::Kind kind);

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  bool has(Violation::Kind kind) const;
};

ValidationReport validate(const Workflow& w);

// ---------------------------------------------------------------------------
// Data dependencies

struct DependencyGraph {
  std::vector<std::string> nodes;  // Invoke ids, document order
  std::set<std::pair<std::string, std::string>> edges;

  std::vector<std::string> successors(std::string_view id) const;
  std::vector<std::string> predecessors(std::string_view id) const;
  // Kahn's algorithm, ties broken by document order.
  std::vector<std::string> topological_order() const;
};

DependencyGraph data_dependency_graph(const Workflow& w);  // throws InvalidWorkflow

std::set<std::string> consumers_of(const Workflow& w, std::string_view lfn);  // throws UnknownFile
std::optional<std::string> producer_of(const Workflow& w, std::string_view lfn);

}  // namespace gridflow
