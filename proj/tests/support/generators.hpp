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

// Seeded generators and small builders shared by the test binaries.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gridflow/engine.hpp"
#include "gridflow/error.hpp"

namespace gridflow::testing {

inline constexpr std::uint64_t kMB = 1000000;

// Code of the gridflow::Error thrown by `fn`, or nullopt when it returns.
template <class Fn>
std::optional<ErrorCode> error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline Activity invoke(std::string id, std::string port_type, std::vector<std::string> inputs,
                       std::vector<OutputSpec> outputs, std::vector<Policy> chain = {}) {
  Activity a;
  a.id = std::move(id);
  a.kind = ActivityKind::Invoke;
  a.binding = Binding::port_type(std::move(port_type));
  a.inputs = std::move(inputs);
  a.outputs = std::move(outputs);
  a.policy_chain = std::move(chain);
  return a;
}

inline Activity composite(std::string id, ActivityKind kind, std::vector<Activity> children) {
  Activity a;
  a.id = std::move(id);
  a.kind = kind;
  a.children = std::move(children);
  return a;
}

inline ServiceDescriptor service(std::string id, std::string port_type, std::string site, double mean,
                                 double jitter = 0.0) {
  ServiceDescriptor s;
  s.service_id = std::move(id);
  s.port_type = std::move(port_type);
  s.site = std::move(site);
  s.mean_exec_seconds = mean;
  s.exec_jitter_fraction = jitter;
  s.uptime_history = {{0.0, 1e12}};
  return s;
}

inline Grid one_site_grid(int slots, std::uint64_t capacity = 1000 * kMB, std::string id = "s1") {
  return Grid({Site{std::move(id), slots, capacity}}, {});
}

inline void declare_files(Workflow& w) {
  std::set<std::string> seen;
  visit_activities(w, [&](const Activity& a, const Activity*) {
    for (const auto& o : a.outputs) {
      if (seen.insert(o.lfn).second) w.files.push_back(DataRef{o.lfn, o.size_bytes});
    }
  });
}

// T1 -> {T2, T3} -> T4 over f1 (100 MB), f2, f3 (50 MB) and f4 (10 MB).
inline Workflow diamond(std::vector<Policy> default_chain = {}, std::vector<Policy> task_chain = {}) {
  Workflow w;
  w.id = "diamond";
  w.root = composite("main", ActivityKind::Sequence,
                     {invoke("T1", "generate", {}, {{"f1", 100 * kMB}}, task_chain),
                      composite("middle", ActivityKind::Flow,
                                {invoke("T2", "transform", {"f1"}, {{"f2", 50 * kMB}}, task_chain),
                                 invoke("T3", "transform", {"f1"}, {{"f3", 50 * kMB}}, task_chain)}),
                      invoke("T4", "merge", {"f2", "f3"}, {{"f4", 10 * kMB}}, task_chain)});
  declare_files(w);
  w.final_outputs = {"f4"};
  w.default_policy_chain = std::move(default_chain);
  return w;
}

inline RunEnvironment diamond_env(std::uint64_t seed = 42) {
  RunEnvironment env;
  env.grid = one_site_grid(2);
  env.registry = {service("gen", "generate", "s1", 10), service("xf-a", "transform", "s1", 20, 0.1),
                  service("xf-b", "transform", "s1", 25), service("merge", "merge", "s1", 5)};
  env.seed = seed;
  return env;
}

// Single invoke "job" producing "out" on a grid of `sites` one-slot sites,
// one "compute" service per site.
inline Workflow single_task(std::vector<Policy> chain = {}) {
  Workflow w;
  w.id = "single";
  w.root = invoke("job", "compute", {}, {{"out", kMB}}, std::move(chain));
  declare_files(w);
  w.final_outputs = {"out"};
  return w;
}

inline RunEnvironment single_env(int sites = 3, double mean = 10.0) {
  RunEnvironment env;
  std::vector<Site> ss;
  std::vector<Link> ls;
  for (int i = 1; i <= sites; ++i) {
    ss.push_back(Site{"s" + std::to_string(i), 1, 100 * kMB});
    env.registry.push_back(service("c" + std::to_string(i), "compute", "s" + std::to_string(i), mean));
    for (int j = 1; j < i; ++j) ls.push_back(Link{"s" + std::to_string(j), "s" + std::to_string(i), 10.0 * kMB, 0.1});
  }
  env.grid = Grid(std::move(ss), std::move(ls));
  return env;
}

struct GeneratedCase {
  Workflow workflow;
  RunEnvironment env;
};

// Random valid DAG workflow with up to `max_tasks` invokes over a random grid.
// Every task has one output; inputs are drawn from earlier outputs. With
// `pinned`, each task gets its own port type served by one service on one
// site, so placement and binding no longer depend on free space.
inline GeneratedCase random_dag(std::uint64_t seed, int max_tasks = 12, bool pinned = false) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  GeneratedCase c;
  const int sites = uniform(1, 3);
  std::vector<Site> ss;
  std::vector<Link> ls;
  for (int i = 0; i < sites; ++i) {
    const std::string sid = "site" + std::to_string(i);
    ss.push_back(Site{sid, uniform(1, 3), 2000 * kMB});
    c.env.registry.push_back(service("svc" + std::to_string(i), "work", sid, uniform(1, 20), 0.2));
    for (int j = 0; j < i; ++j) {
      ls.push_back(Link{"site" + std::to_string(j), sid, static_cast<double>(uniform(10, 100)) * kMB, 0.05});
    }
  }
  c.env.grid = Grid(std::move(ss), std::move(ls));
  c.env.seed = seed;

  const int n = uniform(1, max_tasks);
  std::vector<std::string> produced;
  std::set<std::string> consumed;
  std::vector<Activity> tasks;
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> inputs;
    if (!produced.empty()) {
      const int k = uniform(0, std::min<int>(3, static_cast<int>(produced.size())));
      std::set<std::string> pick;
      for (int j = 0; j < k; ++j) pick.insert(produced[static_cast<std::size_t>(uniform(0, static_cast<int>(produced.size()) - 1))]);
      inputs.assign(pick.begin(), pick.end());
    }
    for (const auto& in : inputs) consumed.insert(in);
    const std::string out = "d" + std::to_string(i);
    std::string port = "work";
    if (pinned) {
      port = "work" + std::to_string(i);
      const std::string sid = "site" + std::to_string(uniform(0, sites - 1));
      c.env.registry.push_back(service("pin" + std::to_string(i), port, sid, uniform(1, 20), 0.2));
    }
    tasks.push_back(invoke("t" + std::to_string(i), port, inputs, {{out, static_cast<std::uint64_t>(uniform(1, 80)) * kMB}}));
    produced.push_back(out);
  }

  Workflow& w = c.workflow;
  w.id = "dag" + std::to_string(seed);
  if (uniform(0, 1) == 0) {
    w.root = composite("root", ActivityKind::Flow, std::move(tasks));
  } else {
    // Sequence of Flow groups, preserving the producer-before-consumer order.
    std::vector<Activity> groups;
    std::vector<Activity> current;
    int g = 0;
    for (auto& t : tasks) {
      current.push_back(std::move(t));
      if (uniform(0, 2) == 0) {
        groups.push_back(composite("g" + std::to_string(g++), ActivityKind::Flow, std::move(current)));
        current.clear();
      }
    }
    if (!current.empty()) groups.push_back(composite("g" + std::to_string(g++), ActivityKind::Flow, std::move(current)));
    w.root = composite("root", ActivityKind::Sequence, std::move(groups));
  }
  declare_files(w);
  for (const auto& p : produced) {
    if (!consumed.count(p)) w.final_outputs.insert(p);
  }
  return c;
}

struct GeneratedHierarchy {
  std::vector<std::string> concepts;
  std::vector<std::pair<std::string, std::string>> is_a;  // child -> parent, parent index < child index
};

inline GeneratedHierarchy random_hierarchy(std::uint64_t seed, int max_concepts = 12) {
  std::mt19937_64 rng(seed);
  GeneratedHierarchy h;
  const int n = std::uniform_int_distribution<int>(1, max_concepts)(rng);
  for (int i = 0; i < n; ++i) h.concepts.push_back("c" + std::to_string(i));
  std::bernoulli_distribution edge(0.3);
  for (int child = 1; child < n; ++child) {
    for (int parent = 0; parent < child; ++parent) {
      if (edge(rng)) h.is_a.emplace_back(h.concepts[static_cast<std::size_t>(child)], h.concepts[static_cast<std::size_t>(parent)]);
    }
  }
  return h;
}

// Brute-force matrix: reach[a][b] iff b is reachable from a over is-a edges
// (reflexive). Breadth-first from every node.
inline std::map<std::string, std::set<std::string>> reachability(const GeneratedHierarchy& h) {
  std::map<std::string, std::set<std::string>> reach;
  for (const auto& start : h.concepts) {
    std::set<std::string>& seen = reach[start];
    std::vector<std::string> frontier{start};
    seen.insert(start);
    while (!frontier.empty()) {
      std::vector<std::string> next;
      for (const auto& c : frontier) {
        for (const auto& [child, parent] : h.is_a) {
          if (child == c && seen.insert(parent).second) next.push_back(parent);
        }
      }
      frontier = std::move(next);
    }
  }
  return reach;
}

// Random workflow covering every activity kind, policy and binding form. Not
// necessarily valid; used for document round-trips.
class StructureGenerator {
 public:
  explicit StructureGenerator(std::uint64_t seed) : rng_(seed) {}

  Workflow workflow() {
    Workflow w;
    w.id = "wf" + std::to_string(pick(0, 999));
    w.variables = {Variable{"n", ValueType::Int, std::int64_t{pick(-5, 5)}},
                   Variable{"flag", ValueType::Bool, pick(0, 1) == 1},
                   Variable{"label", ValueType::String, std::string("x") + std::to_string(pick(0, 9))}};
    w.root = activity(3);
    declare_files(w);
    if (!w.files.empty()) w.final_outputs.insert(w.files.front().lfn);
    if (pick(0, 1)) w.default_policy_chain = chain();
    return w;
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double half_steps(int hi) { return 0.5 * pick(0, hi); }
  std::string next_id() { return "a" + std::to_string(counter_++); }

  Condition condition(int depth) {
    const int c = depth > 0 ? pick(0, 8) : pick(0, 5);
    static constexpr Condition::Op kCmp[] = {Condition::Op::Eq, Condition::Op::Ne, Condition::Op::Lt,
                                             Condition::Op::Le, Condition::Op::Gt, Condition::Op::Ge};
    if (c < 6) {
      switch (pick(0, 2)) {
        case 0: return Condition::compare(kCmp[c], "n", std::int64_t{pick(-3, 3)});
        case 1: return Condition::compare(kCmp[c], "flag", pick(0, 1) == 1);
        default: return Condition::compare(kCmp[c], "label", std::string("x1"));
      }
    }
    if (c == 6) return Condition::negate(condition(depth - 1));
    std::vector<Condition> ops;
    for (int i = pick(1, 3); i > 0; --i) ops.push_back(condition(depth - 1));
    return c == 7 ? Condition::all_of(std::move(ops)) : Condition::any_of(std::move(ops));
  }

  Policy policy() {
    switch (pick(0, 7)) {
      case 0: return RetryPolicy{pick(1, 5), half_steps(10), pick(0, 1) == 1};
      case 1: return RebindPolicy{pick(1, 3)};
      case 2: return ReplicatePolicy{pick(2, 4)};
      case 3: return CheckpointPolicy{pick(0, 1) ? CheckpointMode::Heavy : CheckpointMode::Light, pick(1, 4)};
      case 4: return SavePartialPolicy{};
      case 5: return CompensatePolicy{};
      case 6: return AlertPolicy{half_steps(200) + 1, pick(1, 4), AlertAction{}};
      default: return AlertPolicy{60.0, pick(1, 4), AlertAction{AlertAction::Kind::RunHook, "hook" + std::to_string(pick(0, 3))}};
    }
  }

  std::vector<Policy> chain() {
    std::vector<Policy> c;
    for (int i = pick(0, 3); i > 0; --i) c.push_back(policy());
    return c;
  }

  Activity leaf() {
    const std::string id = next_id();
    std::vector<OutputSpec> outs;
    for (int i = pick(0, 2); i > 0; --i) outs.push_back({"f" + std::to_string(files_++), static_cast<std::uint64_t>(pick(0, 100)) * kMB});
    std::vector<std::string> ins;
    if (files_ > 0 && pick(0, 1)) ins.push_back("f" + std::to_string(pick(0, files_ - 1)));
    Activity a = invoke(id, "pt" + std::to_string(pick(0, 2)), ins, outs, chain());
    switch (pick(0, 2)) {
      case 0: a.binding = Binding::abstract("C" + std::to_string(pick(0, 3))); break;
      case 1: a.binding = Binding::bound("svc" + std::to_string(pick(0, 3))); break;
      default: break;
    }
    if (pick(0, 3) == 0) a.sets = Assignment{"n", std::int64_t{pick(0, 9)}};
    if (pick(0, 3) == 0) a.deadline = 1.0 + half_steps(100);
    if (pick(0, 4) == 0) a.children.push_back(invoke(next_id(), "undo", {}, {}));
    return a;
  }

  Activity activity(int depth) {
    const int k = depth > 0 ? pick(0, 6) : pick(0, 2);
    switch (k) {
      case 0: return leaf();
      case 1: {
        Activity a;
        a.id = next_id();
        a.kind = ActivityKind::Wait;
        a.duration = half_steps(40);
        return a;
      }
      case 2: {
        Activity a;
        a.id = next_id();
        a.kind = ActivityKind::Receive;
        a.message_name = "m" + std::to_string(pick(0, 2));
        return a;
      }
      case 3:
      case 4: {
        std::vector<Activity> kids;
        for (int i = pick(0, 3); i > 0; --i) kids.push_back(activity(depth - 1));
        return composite(next_id(), k == 3 ? ActivityKind::Sequence : ActivityKind::Flow, std::move(kids));
      }
      case 5: {
        Activity a = composite(next_id(), ActivityKind::If, {activity(depth - 1)});
        if (pick(0, 1)) a.children.push_back(activity(depth - 1));
        a.condition = condition(2);
        return a;
      }
      default: {
        Activity a = composite(next_id(), ActivityKind::While, {activity(depth - 1)});
        a.condition = condition(2);
        a.max_iterations = pick(1, 10);
        return a;
      }
    }
  }

  std::mt19937_64 rng_;
  int counter_ = 0;
  int files_ = 0;
};

}  // namespace gridflow::testing
