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
#include <map>
#include <queue>

#include "gridflow/error.hpp"
#include "gridflow/workflow.hpp"

namespace gridflow {

std::string_view violation_name(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::DuplicateId: return "DuplicateId";
    case Violation::Kind::UndeclaredFile: return "UndeclaredFile";
    case Violation::Kind::UndeclaredVariable: return "UndeclaredVariable";
    case Violation::Kind::CyclicDataDependency: return "CyclicDataDependency";
    case Violation::Kind::UnproducedFinalOutput: return "UnproducedFinalOutput";
    case Violation::Kind::MultiProducer: return "MultiProducer";
    case Violation::Kind::AbstractWithoutConcept: return "AbstractWithoutConcept";
    case Violation::Kind::OutputSizeMismatch: return "OutputSizeMismatch";
    case Violation::Kind::InputOutputOverlap: return "InputOutputOverlap";
    case Violation::Kind::InvalidLoopBound: return "InvalidLoopBound";
  }
  return "Unknown";
}

bool ValidationReport::has(Violation::Kind kind) const {
  return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; });
}

namespace {

// Edges from producers to consumers, ignoring files without a producer.
std::map<std::string, std::vector<std::string>> raw_edges(const Workflow& w,
                                                          const std::vector<const Activity*>& invokes) {
  std::map<std::string, std::vector<std::string>> producers;
  for (const auto* a : invokes) {
    for (const auto& o : a->outputs) producers[o.lfn].push_back(a->id);
  }
  std::map<std::string, std::vector<std::string>> edges;
  for (const auto* a : invokes) {
    for (const auto& in : a->inputs) {
      auto it = producers.find(in);
      if (it == producers.end()) continue;
      for (const auto& p : it->second) {
        auto& out = edges[p];
        if (std::find(out.begin(), out.end(), a->id) == out.end()) out.push_back(a->id);
      }
    }
  }
  (void)w;
  return edges;
}

// Returns one cycle (as a node path) if the graph has any.
std::vector<std::string> find_cycle(const std::vector<const Activity*>& invokes,
                                    const std::map<std::string, std::vector<std::string>>& edges) {
  enum class Mark { White, Grey, Black };
  std::map<std::string, Mark> mark;
  for (const auto* a : invokes) mark[a->id] = Mark::White;

  std::vector<std::string> stack;
  std::vector<std::string> cycle;
  std::function<bool(const std::string&)> dfs = [&](const std::string& node) -> bool {
    mark[node] = Mark::Grey;
    stack.push_back(node);
    if (auto it = edges.find(node); it != edges.end()) {
      for (const auto& next : it->second) {
        if (mark[next] == Mark::Grey) {
          auto start = std::find(stack.begin(), stack.end(), next);
          cycle.assign(start, stack.end());
          cycle.push_back(next);
          return true;
        }
        if (mark[next] == Mark::White && dfs(next)) return true;
      }
    }
    stack.pop_back();
    mark[node] = Mark::Black;
    return false;
  };
  for (const auto* a : invokes) {
    if (mark[a->id] == Mark::White && dfs(a->id)) return cycle;
  }
  return {};
}

}  // namespace

ValidationReport validate(const Workflow& w) {
  ValidationReport report;
  auto add = [&](Violation::Kind kind, std::string subject, std::string message) {
    report.violations.push_back(Violation{kind, std::move(subject), std::move(message)});
  };

  std::set<std::string> declared_vars;
  for (const auto& v : w.variables) declared_vars.insert(v.name);

  std::map<std::string, int> id_count;
  std::map<std::string, std::vector<std::string>> producers;
  visit_activities(w, [&](const Activity& a, const Activity*) {
    if (++id_count[a.id] == 2) add(Violation::Kind::DuplicateId, a.id, "activity id '" + a.id + "' is not unique");

    std::set<std::string> vars;
    if (a.condition) collect_variables(*a.condition, vars);
    if (a.sets) vars.insert(a.sets->variable);
    for (const auto& v : vars) {
      if (!declared_vars.count(v)) {
        add(Violation::Kind::UndeclaredVariable, v, "activity '" + a.id + "' references undeclared variable '" + v + "'");
      }
    }

    if (a.kind == ActivityKind::While && a.max_iterations < 1) {
      add(Violation::Kind::InvalidLoopBound, a.id, "while '" + a.id + "' needs max_iterations >= 1");
    }
    if (a.kind != ActivityKind::Invoke) return;

    if (a.binding.kind == Binding::Kind::Abstract && a.binding.target.empty()) {
      add(Violation::Kind::AbstractWithoutConcept, a.id, "abstract invoke '" + a.id + "' names no concept");
    }
    for (const auto& in : a.inputs) {
      if (!w.find_file(in)) add(Violation::Kind::UndeclaredFile, in, "'" + a.id + "' consumes undeclared file '" + in + "'");
    }
    for (const auto& o : a.outputs) {
      producers[o.lfn].push_back(a.id);
      const auto* decl = w.find_file(o.lfn);
      if (!decl) {
        add(Violation::Kind::UndeclaredFile, o.lfn, "'" + a.id + "' produces undeclared file '" + o.lfn + "'");
      } else if (decl->size_bytes != o.size_bytes) {
        add(Violation::Kind::OutputSizeMismatch, o.lfn,
            "'" + a.id + "' declares size " + std::to_string(o.size_bytes) + " for '" + o.lfn + "', files say " +
                std::to_string(decl->size_bytes));
      }
      if (std::find(a.inputs.begin(), a.inputs.end(), o.lfn) != a.inputs.end()) {
        add(Violation::Kind::InputOutputOverlap, a.id, "'" + a.id + "' both consumes and produces '" + o.lfn + "'");
      }
    }
  });

  for (const auto& [lfn, who] : producers) {
    if (who.size() > 1) add(Violation::Kind::MultiProducer, lfn, "'" + lfn + "' is produced by more than one activity");
  }
  for (const auto& lfn : w.final_outputs) {
    if (!producers.count(lfn)) {
      add(Violation::Kind::UnproducedFinalOutput, lfn, "final output '" + lfn + "' has no producer");
    }
  }

  const auto invokes = invokes_of(w);
  const auto cycle = find_cycle(invokes, raw_edges(w, invokes));
  if (!cycle.empty()) {
    std::string path;
    for (const auto& n : cycle) path += (path.empty() ? "" : " -> ") + n;
    add(Violation::Kind::CyclicDataDependency, cycle.front(), "data dependency cycle: " + path);
  }
  return report;
}

std::vector<std::string> DependencyGraph::successors(std::string_view id) const {
  std::vector<std::string> out;
  for (const auto& [from, to] : edges) {
    if (from == id) out.push_back(to);
  }
  return out;
}

std::vector<std::string> DependencyGraph::predecessors(std::string_view id) const {
  std::vector<std::string> out;
  for (const auto& [from, to] : edges) {
    if (to == id) out.push_back(from);
  }
  return out;
}

std::vector<std::string> DependencyGraph::topological_order() const {
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < nodes.size(); ++i) position[nodes[i]] = i;
  std::vector<int> indegree(nodes.size(), 0);
  for (const auto& [from, to] : edges) ++indegree[position.at(to)];

  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    const auto i = ready.top();
    ready.pop();
    order.push_back(nodes[i]);
    for (const auto& next : successors(nodes[i])) {
      if (--indegree[position.at(next)] == 0) ready.push(position.at(next));
    }
  }
  if (order.size() != nodes.size()) throw Error(ErrorCode::InvalidWorkflow, "dependency graph has a cycle");
  return order;
}

DependencyGraph data_dependency_graph(const Workflow& w) {
  const auto report = validate(w);
  if (!report.ok()) {
    throw Error(ErrorCode::InvalidWorkflow, "workflow '" + w.id + "' does not validate: " +
                                                report.violations.front().message);
  }
  DependencyGraph g;
  const auto invokes = invokes_of(w);
  for (const auto* a : invokes) g.nodes.push_back(a->id);
  for (const auto& [from, tos] : raw_edges(w, invokes)) {
    for (const auto& to : tos) g.edges.emplace(from, to);
  }
  return g;
}

std::set<std::string> consumers_of(const Workflow& w, std::string_view lfn) {
  if (!w.find_file(lfn)) throw Error(ErrorCode::UnknownFile, "file '" + std::string(lfn) + "' is not declared");
  std::set<std::string> out;
  for (const auto* a : invokes_of(w)) {
    if (std::find(a->inputs.begin(), a->inputs.end(), lfn) != a->inputs.end()) out.insert(a->id);
  }
  return out;
}

std::optional<std::string> producer_of(const Workflow& w, std::string_view lfn) {
  for (const auto* a : invokes_of(w)) {
    for (const auto& o : a->outputs) {
      if (o.lfn == lfn) return a->id;
    }
  }
  return std::nullopt;
}

}  // namespace gridflow
