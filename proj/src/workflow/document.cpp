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

// JSON workflow definition format.

#include "common/json_util.hpp"
#include "gridflow/workflow.hpp"

namespace gridflow {

using detail::json;
using ojson = nlohmann::ordered_json;

Value value_from_json(const json& j, std::string_view ctx) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  detail::shape_error(ctx, "expected a boolean, integer or string literal");
}

ojson value_to_json(const Value& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  return std::get<std::string>(v);
}

namespace {

struct OpName {
  Condition::Op op;
  std::string_view name;
};

constexpr OpName kOps[] = {
    {Condition::Op::Eq, "=="}, {Condition::Op::Ne, "!="},  {Condition::Op::Lt, "<"},
    {Condition::Op::Le, "<="}, {Condition::Op::Gt, ">"},   {Condition::Op::Ge, ">="},
    {Condition::Op::And, "and"}, {Condition::Op::Or, "or"}, {Condition::Op::Not, "not"},
};

std::string_view op_name(Condition::Op op) {
  for (const auto& o : kOps) {
    if (o.op == op) return o.name;
  }
  return "==";
}

std::vector<Policy> policies_from_json(const json& j, std::string_view ctx) {
  detail::expect_array(j, ctx);
  std::vector<Policy> out;
  for (const auto& p : j) out.push_back(policy_from_json(p));
  return out;
}

ojson policies_to_json(const std::vector<Policy>& chain) {
  ojson arr = ojson::array();
  for (const auto& p : chain) arr.push_back(policy_to_json(p));
  return arr;
}

Binding binding_from_json(const json& j, std::string_view ctx) {
  const auto type = detail::get_string(j, "type", ctx);
  if (type == "abstract") {
    const auto* c = detail::optional_field(j, "concept");
    return Binding::abstract(c ? detail::as_string(*c, detail::join_path(ctx, "concept")) : std::string{});
  }
  if (type == "port_type") return Binding::port_type(detail::get_string(j, "name", ctx));
  if (type == "bound") return Binding::bound(detail::get_string(j, "service_id", ctx));
  detail::shape_error(detail::join_path(ctx, "type"), "unknown binding type '" + type + "'");
}

ojson binding_to_json(const Binding& b) {
  ojson j;
  switch (b.kind) {
    case Binding::Kind::Abstract:
      j["type"] = "abstract";
      if (!b.target.empty()) j["concept"] = b.target;
      break;
    case Binding::Kind::PortType:
      j["type"] = "port_type";
      j["name"] = b.target;
      break;
    case Binding::Kind::Bound:
      j["type"] = "bound";
      j["service_id"] = b.target;
      break;
  }
  return j;
}

Activity activity_from_json(const json& j, const std::string& ctx) {
  Activity a;
  a.id = detail::get_string(j, "id", ctx);
  const std::string here = ctx + "[" + a.id + "]";
  const auto kind_text = detail::get_string(j, "kind", here);
  const auto kind = parse_activity_kind(kind_text);
  if (!kind) {
    throw Error(ErrorCode::UnknownActivityKind, "activity '" + a.id + "' has unsupported kind '" + kind_text + "'");
  }
  a.kind = *kind;

  switch (a.kind) {
    case ActivityKind::Invoke: {
      a.binding = binding_from_json(detail::require(j, "binding", here), here + ".binding");
      if (const auto* in = detail::optional_field(j, "inputs")) {
        for (const auto& lfn : detail::expect_array(*in, here + ".inputs")) {
          a.inputs.push_back(detail::as_string(lfn, here + ".inputs"));
        }
      }
      if (const auto* out = detail::optional_field(j, "outputs")) {
        for (const auto& o : detail::expect_array(*out, here + ".outputs")) {
          a.outputs.push_back(OutputSpec{detail::get_string(o, "lfn", here + ".outputs"),
                                         detail::get_uint(o, "size_bytes", here + ".outputs")});
        }
      }
      if (const auto* s = detail::optional_field(j, "sets")) {
        a.sets = Assignment{detail::get_string(*s, "variable", here + ".sets"),
                            value_from_json(detail::require(*s, "value", here + ".sets"), here + ".sets.value")};
      }
      if (const auto* p = detail::optional_field(j, "policy_chain")) {
        a.policy_chain = policies_from_json(*p, here + ".policy_chain");
      }
      if (const auto* c = detail::optional_field(j, "compensation")) {
        a.children.push_back(activity_from_json(*c, here + ".compensation"));
      }
      if (const auto* d = detail::optional_field(j, "deadline")) {
        a.deadline = detail::as_number(*d, here + ".deadline");
        if (*a.deadline <= 0) detail::shape_error(here + ".deadline", "must be positive");
      }
      break;
    }
    case ActivityKind::Sequence:
    case ActivityKind::Flow: {
      for (const auto& c : detail::expect_array(detail::require(j, "children", here), here + ".children")) {
        a.children.push_back(activity_from_json(c, here + ".children"));
      }
      break;
    }
    case ActivityKind::If: {
      a.condition = condition_from_json(detail::require(j, "condition", here));
      a.children.push_back(activity_from_json(detail::require(j, "then", here), here + ".then"));
      if (const auto* e = detail::optional_field(j, "else")) a.children.push_back(activity_from_json(*e, here + ".else"));
      break;
    }
    case ActivityKind::While: {
      a.condition = condition_from_json(detail::require(j, "condition", here));
      a.children.push_back(activity_from_json(detail::require(j, "body", here), here + ".body"));
      a.max_iterations = static_cast<int>(detail::get_int(j, "max_iterations", here));
      break;
    }
    case ActivityKind::Wait: {
      a.duration = detail::get_number(j, "duration", here);
      if (a.duration < 0) detail::shape_error(here + ".duration", "must be non-negative");
      break;
    }
    case ActivityKind::Receive: {
      a.message_name = detail::get_string(j, "message_name", here);
      break;
    }
  }
  return a;
}

ojson activity_to_json(const Activity& a) {
  ojson j;
  j["id"] = a.id;
  j["kind"] = kind_name(a.kind);
  switch (a.kind) {
    case ActivityKind::Invoke: {
      j["binding"] = binding_to_json(a.binding);
      j["inputs"] = a.inputs;
      ojson outs = ojson::array();
      for (const auto& o : a.outputs) outs.push_back(ojson{{"lfn", o.lfn}, {"size_bytes", o.size_bytes}});
      j["outputs"] = outs;
      if (a.sets) j["sets"] = ojson{{"variable", a.sets->variable}, {"value", value_to_json(a.sets->value)}};
      j["policy_chain"] = policies_to_json(a.policy_chain);
      if (const auto* c = a.compensation()) j["compensation"] = activity_to_json(*c);
      if (a.deadline) j["deadline"] = *a.deadline;
      break;
    }
    case ActivityKind::Sequence:
    case ActivityKind::Flow: {
      ojson kids = ojson::array();
      for (const auto& c : a.children) kids.push_back(activity_to_json(c));
      j["children"] = kids;
      break;
    }
    case ActivityKind::If:
      j["condition"] = condition_to_json(*a.condition);
      j["then"] = activity_to_json(*a.then_branch());
      if (const auto* e = a.else_branch()) j["else"] = activity_to_json(*e);
      break;
    case ActivityKind::While:
      j["condition"] = condition_to_json(*a.condition);
      j["body"] = activity_to_json(*a.body());
      j["max_iterations"] = a.max_iterations;
      break;
    case ActivityKind::Wait:
      j["duration"] = a.duration;
      break;
    case ActivityKind::Receive:
      j["message_name"] = a.message_name;
      break;
  }
  return j;
}

ValueType value_type_from_name(const std::string& name, std::string_view ctx) {
  for (auto t : {ValueType::Bool, ValueType::Int, ValueType::String}) {
    if (type_name(t) == name) return t;
  }
  detail::shape_error(ctx, "unknown variable type '" + name + "'");
}

}  // namespace

Condition condition_from_json(const json& j) {
  constexpr std::string_view ctx = "condition";
  const auto op_text = detail::get_string(j, "op", ctx);
  const OpName* found = nullptr;
  for (const auto& o : kOps) {
    if (o.name == op_text) found = &o;
  }
  if (!found) detail::shape_error("condition.op", "unknown operator '" + op_text + "'");

  Condition c;
  c.op = found->op;
  if (c.op == Condition::Op::And || c.op == Condition::Op::Or) {
    for (const auto& arg : detail::expect_array(detail::require(j, "args", ctx), "condition.args")) {
      c.operands.push_back(condition_from_json(arg));
    }
    if (c.operands.empty()) detail::shape_error("condition.args", "needs at least one operand");
  } else if (c.op == Condition::Op::Not) {
    c.operands.push_back(condition_from_json(detail::require(j, "arg", ctx)));
  } else {
    c.variable = detail::get_string(j, "var", ctx);
    c.literal = value_from_json(detail::require(j, "value", ctx), "condition.value");
  }
  return c;
}

ojson condition_to_json(const Condition& c) {
  ojson j;
  j["op"] = op_name(c.op);
  if (c.op == Condition::Op::And || c.op == Condition::Op::Or) {
    ojson args = ojson::array();
    for (const auto& o : c.operands) args.push_back(condition_to_json(o));
    j["args"] = args;
  } else if (c.op == Condition::Op::Not) {
    j["arg"] = condition_to_json(c.operands.front());
  } else {
    j["var"] = c.variable;
    j["value"] = value_to_json(c.literal);
  }
  return j;
}

Workflow workflow_from_json(const json& doc) {
  Workflow w;
  detail::expect_object(doc, "workflow");
  w.id = detail::get_string(doc, "id", "workflow");

  if (const auto* vars = detail::optional_field(doc, "variables")) {
    for (const auto& v : detail::expect_array(*vars, "variables")) {
      Variable var;
      var.name = detail::get_string(v, "name", "variables");
      var.type = value_type_from_name(detail::get_string(v, "type", "variables"), "variables.type");
      var.init = value_from_json(detail::require(v, "init", "variables"), "variables.init");
      if (type_of(var.init) != var.type) {
        detail::shape_error("variables[" + var.name + "].init", "literal does not match declared type");
      }
      w.variables.push_back(std::move(var));
    }
  }
  for (const auto& f : detail::expect_array(detail::require(doc, "files", "workflow"), "files")) {
    w.files.push_back(DataRef{detail::get_string(f, "lfn", "files"), detail::get_uint(f, "size_bytes", "files")});
  }
  for (const auto& lfn : detail::expect_array(detail::require(doc, "final_outputs", "workflow"), "final_outputs")) {
    w.final_outputs.insert(detail::as_string(lfn, "final_outputs"));
  }
  if (const auto* chain = detail::optional_field(doc, "default_policy_chain")) {
    w.default_policy_chain = policies_from_json(*chain, "default_policy_chain");
  }
  w.root = activity_from_json(detail::require(doc, "root", "workflow"), "root");
  return w;
}

Workflow parse_workflow(std::string_view document_text) {
  const json doc = detail::parse_text(document_text);
  try {
    return workflow_from_json(doc);
  } catch (const json::exception& e) {
    throw SyntaxError(e.what(), 0, 0);
  }
}

ojson workflow_to_json(const Workflow& w) {
  ojson j;
  j["id"] = w.id;
  ojson vars = ojson::array();
  for (const auto& v : w.variables) {
    vars.push_back(ojson{{"name", v.name}, {"type", type_name(v.type)}, {"init", value_to_json(v.init)}});
  }
  j["variables"] = vars;
  ojson files = ojson::array();
  for (const auto& f : w.files) files.push_back(ojson{{"lfn", f.lfn}, {"size_bytes", f.size_bytes}});
  j["files"] = files;
  j["final_outputs"] = ojson(std::vector<std::string>(w.final_outputs.begin(), w.final_outputs.end()));
  j["default_policy_chain"] = policies_to_json(w.default_policy_chain);
  j["root"] = activity_to_json(w.root);
  return j;
}

std::string serialize_workflow(const Workflow& w) { return workflow_to_json(w).dump(2) + "\n"; }

}  // namespace gridflow
