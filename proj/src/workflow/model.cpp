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

#include "gridflow/workflow.hpp"

#include <algorithm>

namespace gridflow {

std::string_view type_name(ValueType type) {
  switch (type) {
    case ValueType::Bool: return "bool";
    case ValueType::Int: return "int";
    case ValueType::String: return "string";
  }
  return "int";
}

ValueType type_of(const Value& value) {
  switch (value.index()) {
    case 0: return ValueType::Bool;
    case 1: return ValueType::Int;
    default: return ValueType::String;
  }
}

std::string to_string(const Value& value) {
  if (const auto* b = std::get_if<bool>(&value)) return *b ? "true" : "false";
  if (const auto* i = std::get_if<std::int64_t>(&value)) return std::to_string(*i);
  return std::get<std::string>(value);
}

Condition Condition::compare(Op op, std::string variable, Value literal) {
  Condition c;
  c.op = op;
  c.variable = std::move(variable);
  c.literal = std::move(literal);
  return c;
}

Condition Condition::all_of(std::vector<Condition> operands) {
  Condition c;
  c.op = Op::And;
  c.operands = std::move(operands);
  return c;
}

Condition Condition::any_of(std::vector<Condition> operands) {
  Condition c;
  c.op = Op::Or;
  c.operands = std::move(operands);
  return c;
}

Condition Condition::negate(Condition operand) {
  Condition c;
  c.op = Op::Not;
  c.operands.push_back(std::move(operand));
  return c;
}

bool evaluate(const Condition& condition, const VariableMap& variables) {
  using Op = Condition::Op;
  switch (condition.op) {
    case Op::And:
      return std::all_of(condition.operands.begin(), condition.operands.end(),
                         [&](const Condition& c) { return evaluate(c, variables); });
    case Op::Or:
      return std::any_of(condition.operands.begin(), condition.operands.end(),
                         [&](const Condition& c) { return evaluate(c, variables); });
    case Op::Not:
      return condition.operands.empty() ? true : !evaluate(condition.operands.front(), variables);
    default:
      break;
  }

  auto it = variables.find(condition.variable);
  if (it == variables.end() || it->second.index() != condition.literal.index()) {
    return condition.op == Op::Ne;
  }
  const Value& lhs = it->second;
  const Value& rhs = condition.literal;
  switch (condition.op) {
    case Op::Eq: return lhs == rhs;
    case Op::Ne: return lhs != rhs;
    case Op::Lt: return lhs < rhs;
    case Op::Le: return lhs <= rhs;
    case Op::Gt: return lhs > rhs;
    case Op::Ge: return lhs >= rhs;
    default: return false;
  }
}

void collect_variables(const Condition& condition, std::set<std::string>& out) {
  if (condition.is_comparison()) {
    out.insert(condition.variable);
    return;
  }
  for (const auto& c : condition.operands) collect_variables(c, out);
}

std::string_view kind_name(ActivityKind kind) {
  switch (kind) {
    case ActivityKind::Invoke: return "invoke";
    case ActivityKind::Sequence: return "sequence";
    case ActivityKind::Flow: return "flow";
    case ActivityKind::If: return "if";
    case ActivityKind::While: return "while";
    case ActivityKind::Wait: return "wait";
    case ActivityKind::Receive: return "receive";
  }
  return "sequence";
}

std::optional<ActivityKind> parse_activity_kind(std::string_view name) {
  for (auto kind : {ActivityKind::Invoke, ActivityKind::Sequence, ActivityKind::Flow, ActivityKind::If,
                    ActivityKind::While, ActivityKind::Wait, ActivityKind::Receive}) {
    if (kind_name(kind) == name) return kind;
  }
  return std::nullopt;
}

const Activity* Activity::then_branch() const {
  return kind == ActivityKind::If && !children.empty() ? &children[0] : nullptr;
}

const Activity* Activity::else_branch() const {
  return kind == ActivityKind::If && children.size() > 1 ? &children[1] : nullptr;
}

const Activity* Activity::body() const {
  return kind == ActivityKind::While && !children.empty() ? &children[0] : nullptr;
}

const Activity* Activity::compensation() const {
  return kind == ActivityKind::Invoke && !children.empty() ? &children[0] : nullptr;
}

std::span<const Activity> Activity::structural_children() const {
  if (kind == ActivityKind::Invoke) return {};
  return children;
}

const DataRef* Workflow::find_file(std::string_view lfn) const {
  for (const auto& f : files) {
    if (f.lfn == lfn) return &f;
  }
  return nullptr;
}

std::vector<const Activity*> invokes_of(const Workflow& w) {
  std::vector<const Activity*> out;
  visit_activities(w, [&](const Activity& a, const Activity*) {
    if (a.kind == ActivityKind::Invoke) out.push_back(&a);
  });
  return out;
}

}  // namespace gridflow
