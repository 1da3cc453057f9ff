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

// Acceptance harness. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "generators.hpp"
#include "gridflow/checkpoint.hpp"
#include "gridflow/cli.hpp"
#include "replayer.hpp"

namespace fs = std::filesystem;
using namespace gridflow;
using namespace gridflow::testing;

namespace {

const std::string kFix = GRIDFLOW_FIXTURES;
std::string fixture(const std::string& name) { return kFix + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int sh(const std::string& args) {
  const std::string cmd = std::string(GRIDFLOW_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Aggregated replay outcome over every run of criteria 2 to 8.
struct SafetyTally {
  long runs = 0;
  long illegal = 0;
  long cleanup = 0;
  long slots = 0;
  long other = 0;
  std::string first;

  void add(const ReplayResult& rr) {
    ++runs;
    illegal += rr.illegal_transitions;
    cleanup += rr.cleanup_violations;
    slots += rr.slot_violations;
    other += static_cast<long>(rr.violations.size()) - rr.illegal_transitions - rr.cleanup_violations -
             rr.slot_violations;
    if (first.empty() && !rr.violations.empty()) first = rr.violations.front();
  }
};

SafetyTally g_safety;

ReplayResult replayed(const RunResult& r, const Workflow& w, const Grid& g) {
  ReplayResult rr = replay(r.log, w, g);
  g_safety.add(rr);
  return rr;
}

int g_failures = 0;

void report(int n, const std::string& name, bool ok, const std::string& detail) {
  std::printf("criterion %d %-26s %s  %s\n", n, name.c_str(), ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

RunEnvironment single_environment(const std::vector<std::string>& overrides) {
  RunConfig cfg;
  cfg.grid = fixture("single_grid.json");
  cfg.registry = fixture("single_registry.json");
  for (const auto& o : overrides) cfg.overrides.push_back(parse_fault_override(o));
  return load_environment(cfg);
}

void determinism(const fs::path& tmp) {
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    std::string wf, grid, reg, extra;
    int seed;
  };
  std::vector<Case> cases;
  for (int s : {1, 2, 3}) cases.push_back({"diamond.json", "grid.json", "registry.json", "", s});
  for (int s : {1, 2, 3, 4}) {
    cases.push_back({"diamond_retry.json", "grid2.json", "registry2.json", "--faults " + fixture("faults_task_half.json"), s});
  }
  for (int s : {5, 6}) cases.push_back({"single_retry.json", "single_grid.json", "single_registry.json", "--fault task=0.5:1.0", s});
  for (int s : {7, 8}) {
    cases.push_back({"single_replicate.json", "single_grid.json", "single_registry.json", "--fault os=0.6 --fault middleware=0.3", s});
  }
  int same = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    std::string out[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path dir = tmp / fmt("det%zu_%d", i, k);
      sh("run --workflow " + fixture(c.wf) + " --grid " + fixture(c.grid) + " --registry " + fixture(c.reg) + " --seed " +
         std::to_string(c.seed) + " " + c.extra + " -o " + dir.string());
      out[k] = slurp(dir / "events.jsonl");
    }
    if (!out[0].empty() && out[0] == out[1]) ++same;
  }
  const double secs = seconds_since(t0);
  report(1, "determinism", same == static_cast<int>(cases.size()) && secs < 10.0,
         fmt("%d/%zu pairs byte-identical, %.2f s", same, cases.size(), secs));
}

void retry_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const Workflow w = load_workflow_file(fixture("single_retry.json"));
  RunEnvironment env = single_environment({"task=0.5:1.0"});
  constexpr int kRuns = 10000;
  int ok = 0;
  for (int seed = 1; seed <= kRuns; ++seed) {
    env.seed = static_cast<std::uint64_t>(seed);
    const RunResult r = run_to_completion(w, env);
    replayed(r, w, env.grid);
    ok += r.report.state == ProcessState::Completed;
  }
  const double frac = static_cast<double>(ok) / kRuns;
  const double expect = 1.0 - std::pow(0.5, 3);
  const double secs = seconds_since(t0);
  report(2, "retry oracle", std::abs(frac - expect) <= 0.02 && secs < 60.0,
         fmt("success %.4f vs %.4f +- 0.02 over %d seeds, %.2f s", frac, expect, kRuns, secs));
}

void replication_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const Workflow w = load_workflow_file(fixture("single_replicate.json"));
  RunEnvironment env = single_environment({"task=0.5:1.0"});
  constexpr int kRuns = 10000;
  int failed = 0;
  for (int seed = 1; seed <= kRuns; ++seed) {
    env.seed = static_cast<std::uint64_t>(seed);
    const RunResult r = run_to_completion(w, env);
    replayed(r, w, env.grid);
    failed += r.report.state != ProcessState::Completed;
  }
  const double frac = static_cast<double>(failed) / kRuns;
  const double expect = std::pow(0.5, 3);
  const double secs = seconds_since(t0);
  report(3, "replication oracle", std::abs(frac - expect) <= 0.02 && secs < 60.0,
         fmt("failure %.4f vs %.4f +- 0.02 over %d seeds, %.2f s", frac, expect, kRuns, secs));
}

void detection_rates() {
  const Workflow w = load_workflow_file(fixture("single.json"));
  const std::vector<std::pair<FaultLevel, double>> levels = {{FaultLevel::OperatingSystem, 0.37},
                                                             {FaultLevel::Middleware, 0.628},
                                                             {FaultLevel::Task, 0.30},
                                                             {FaultLevel::Workflow, 0.625},
                                                             {FaultLevel::User, 0.25}};
  bool ok = true;
  std::string detail;
  for (const auto& [level, expect] : levels) {
    RunEnvironment env = single_environment({std::string(level_name(level)) + "=1.0"});
    long injected = 0, detected = 0;
    for (int seed = 1; seed <= 1000; ++seed) {
      env.seed = static_cast<std::uint64_t>(seed);
      const RunResult r = run_to_completion(w, env);
      replayed(r, w, env.grid);
      const auto it = r.report.faults.find(level);
      if (it == r.report.faults.end()) continue;
      injected += it->second.injected;
      detected += it->second.detected;
    }
    const double frac = injected ? static_cast<double>(detected) / injected : 0.0;
    const bool good = injected >= 1000 && std::abs(frac - expect) <= 0.05;
    ok = ok && good;
    detail += fmt("%s %.3f/%.3f%s ", std::string(level_name(level)).c_str(), frac, expect, good ? "" : "(!)");
  }
  report(4, "detection pass-through", ok, detail + "(+- 0.05, 1000 runs each)");
}

std::map<std::string, std::set<std::string>> provenance_inputs(const fs::path& p) {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& j : read_jsonl(p.string())) {
    const auto rec = provenance_from_json(j);
    out[rec.lfn] = std::set<std::string>(rec.input_lfns.begin(), rec.input_lfns.end());
  }
  return out;
}

void checkpoint_equivalence(const fs::path& tmp) {
  const std::string env_args = " --grid " + fixture("grid.json") + " --registry " + fixture("registry.json");
  const fs::path ref = tmp / "ckpt_ref";
  const fs::path run = tmp / "ckpt_heavy";
  const fs::path dir = tmp / "ckpt_files";
  const Workflow diamond_wf = load_workflow_file(fixture("diamond.json"));
  const Grid grid = load_grid(slurp(fixture("grid.json")));

  bool heavy_ok = sh("run --workflow " + fixture("diamond.json") + env_args + " --seed 9 -o " + ref.string()) == 0;
  heavy_ok = heavy_ok && sh("run --workflow " + fixture("diamond_heavy.json") + env_args + " --seed 9 --checkpoint-dir " +
                            dir.string() + " --halt-after-checkpoints 2 -o " + run.string()) == 0;
  const fs::path ckpt = dir / "diamond-1-2.ckpt";
  heavy_ok = heavy_ok && fs::exists(ckpt) &&
             sh("resume --checkpoint " + ckpt.string() + env_args + " --seed 9 -o " + run.string()) == 0;

  std::string detail = "heavy resume failed to run";
  if (heavy_ok) {
    const auto want = nlohmann::json::parse(slurp(ref / "catalog.json"));
    const auto got = nlohmann::json::parse(slurp(run / "catalog.json"));
    bool same_outputs = true;
    for (const auto& lfn : diamond_wf.final_outputs) {
      const auto a = catalog_from_json(want).size_of(lfn);
      const auto b = catalog_from_json(got).size_of(lfn);
      same_outputs = same_outputs && a && a == b;
    }
    const bool same_prov = provenance_inputs(ref / "provenance.jsonl") == provenance_inputs(run / "provenance.jsonl");
    const Workflow heavy_wf = load_workflow_file(fixture("diamond_heavy.json"));
    const ReplayResult rr = replay(read_jsonl((run / "events.jsonl").string()), heavy_wf, grid);
    g_safety.add(rr);
    heavy_ok = same_outputs && same_prov && rr.clean() && rr.terminated && rr.recount.state == ProcessState::Completed;
    detail = fmt("heavy: outputs %s, provenance %s;", same_outputs ? "equal" : "differ", same_prov ? "equal" : "differ");
  }

  const fs::path light_run = tmp / "ckpt_light";
  const fs::path light_dir = tmp / "ckpt_light_files";
  int light_code = -1;
  if (sh("run --workflow " + fixture("diamond_light.json") + env_args + " --checkpoint-dir " + light_dir.string() +
         " --halt-after-checkpoints 1 -o " + light_run.string()) == 0) {
    light_code = sh("resume --checkpoint " + (light_dir / "diamond-1-1.ckpt").string() + env_args + " --catalog " +
                    (ref / "catalog.json").string() + " -o " + (tmp / "ckpt_late").string());
  }
  detail += fmt(" light after cleanup exit %d", light_code);
  report(5, "checkpoint equivalence", heavy_ok && light_code == kExitStaleCheckpoint, detail);
}

void footprint_dominance() {
  const auto t0 = std::chrono::steady_clock::now();
  int dominated = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    GeneratedCase c = random_dag(seed, 12, true);
    ++total;
    c.env.cleanup = true;
    const RunResult with = run_to_completion(c.workflow, c.env);
    c.env.cleanup = false;
    const RunResult without = run_to_completion(c.workflow, c.env);
    const ReplayResult a = replayed(with, c.workflow, c.env.grid);
    const ReplayResult b = replayed(without, c.workflow, c.env.grid);
    bool ok = a.clean() && b.clean() && with.report.state == ProcessState::Completed &&
              without.report.state == ProcessState::Completed &&
              dispatch_schedule(with.log) == dispatch_schedule(without.log);
    for (const auto& site : c.env.grid.sites()) {
      const auto get = [&](const ReplayResult& rr) {
        const auto it = rr.recount.peak_storage.find(site.site_id);
        return it == rr.recount.peak_storage.end() ? std::uint64_t{0} : it->second;
      };
      ok = ok && get(a) <= get(b);
    }
    dominated += ok;
  }
  const Workflow w = load_workflow_file(fixture("diamond.json"));
  RunConfig cfg;
  cfg.grid = fixture("grid.json");
  cfg.registry = fixture("registry.json");
  RunEnvironment env = load_environment(cfg);
  const auto peak = [&](bool cleanup) {
    env.cleanup = cleanup;
    const RunResult r = run_to_completion(w, env);
    const ReplayResult rr = replayed(r, w, env.grid);
    return rr.recount.peak_storage.count("siteA") ? rr.recount.peak_storage.at("siteA") : std::uint64_t{0};
  };
  const std::uint64_t with = peak(true), without = peak(false);
  const double secs = seconds_since(t0);
  report(6, "footprint dominance",
         dominated == total && with == 200 * kMB && without == 210 * kMB && secs < 120.0,
         fmt("%d/%d dags dominated under an identical schedule; diamond %llu MB vs %llu MB; %.2f s", dominated, total,
             static_cast<unsigned long long>(with / kMB), static_cast<unsigned long long>(without / kMB), secs));
}

void binding_rules() {
  const double now = kDefaultEpoch;
  const Registry slow_reg{service("slow", "p", "s1", 7200), service("fast", "p", "s1", 3600)};
  const bool slow_ok = find_candidates(slow_reg, "p", MatchRules::defaults(), now) == std::vector<std::string>{"fast"};

  ServiceDescriptor gap = service("gap", "p", "s1", 10);
  gap.uptime_history = {{0, now - 200000}, {now - 199000, now + 1e6}};
  ServiceDescriptor old_gap = service("old", "p", "s1", 10);
  old_gap.uptime_history = {{0, now - 300000}, {now - 299000, now + 1e6}};
  const bool gap_ok =
      find_candidates(Registry{gap, old_gap}, "p", MatchRules::defaults(), now) == std::vector<std::string>{"old"};

  const ConceptHierarchy h({"Analysis", "Spectral", "FFT", "Alignment"},
                           {{"Spectral", "Analysis"}, {"FFT", "Spectral"}, {"Alignment", "Analysis"}});
  const bool golden_concept = matches_concept(h, "FFT", "Spectral") && matches_concept(h, "FFT", "Analysis") &&
                              !matches_concept(h, "Spectral", "FFT") && !matches_concept(h, "Alignment", "Spectral");

  int agree = 0, checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto g = random_hierarchy(seed);
    const ConceptHierarchy rh(std::set<std::string>(g.concepts.begin(), g.concepts.end()), g.is_a);
    const auto reach = reachability(g);
    bool all = true;
    for (const auto& a : g.concepts) {
      for (const auto& b : g.concepts) all = all && matches_concept(rh, a, b) == (reach.at(a).count(b) > 0);
    }
    agree += all;
    ++checked;
  }
  report(7, "binding rules", slow_ok && gap_ok && golden_concept && agree == checked,
         fmt("7200 s excluded %s, 72 h gap excluded %s, subsumption goldens %s, %d/%d random hierarchies",
             slow_ok ? "yes" : "no", gap_ok ? "yes" : "no", golden_concept ? "ok" : "bad", agree, checked));
}

void engine_semantics() {
  const auto flow = [](int n) {
    Workflow w;
    w.id = "flow";
    RunEnvironment env;
    env.grid = one_site_grid(2);
    std::vector<Activity> kids;
    for (int i = 0; i < n; ++i) {
      kids.push_back(invoke("T" + std::to_string(i), "p", {}, {}));
    }
    env.registry.push_back(service("svc", "p", "s1", 5));
    w.root = composite("root", ActivityKind::Flow, std::move(kids));
    const RunResult r = run_to_completion(w, env);
    replayed(r, w, env.grid);
    return r.report.state == ProcessState::Completed ? r.report.makespan : -1.0;
  };
  const double two = flow(2), three = flow(3);

  Workflow w;
  w.id = "loop";
  w.variables = {Variable{"go", ValueType::Bool, true}};
  Activity loop = composite("loop", ActivityKind::While, {invoke("body", "compute", {}, {})});
  loop.condition = Condition::compare(Condition::Op::Eq, "go", true);
  loop.max_iterations = 5;
  w.root = loop;
  const RunEnvironment env = single_env(1);
  const RunResult r = run_to_completion(w, env);
  replayed(r, w, env.grid);
  int completions = 0;
  double last_completion = 0.0;
  std::vector<const EngineEvent*> faults;
  for (const auto& e : r.log) {
    if (e.kind == EventKind::TaskCompleted && e.subject == "body") {
      ++completions;
      last_completion = e.at;
    }
    if (e.kind == EventKind::TaskFailed) faults.push_back(&e);
  }
  const bool loop_ok = completions == 5 && faults.size() == 1 && faults[0]->detail["kind"] == "InfiniteLoop" &&
                       faults[0]->detail["level"] == "workflow" && faults[0]->at >= last_completion;
  report(8, "engine semantics", two == 5.0 && three == 10.0 && loop_ok,
         fmt("flow 2x5 s makespan %.1f, 3x5 s makespan %.1f, while: %d completions then %s", two, three, completions,
             faults.empty() ? "no fault" : faults[0]->detail["kind"].get<std::string>().c_str()));
}

void safety_replay() {
  const bool ok = g_safety.runs > 0 && g_safety.illegal == 0 && g_safety.cleanup == 0 && g_safety.slots == 0 &&
                  g_safety.other == 0;
  report(9, "safety replay", ok,
         fmt("%ld runs replayed: %ld illegal transitions, %ld cleanup, %ld slot, %ld other violations%s%s", g_safety.runs,
             g_safety.illegal, g_safety.cleanup, g_safety.slots, g_safety.other, g_safety.first.empty() ? "" : "; first: ",
             g_safety.first.c_str()));
}

}  // namespace

int main() {
  const fs::path tmp = fs::temp_directory_path() / ("gridflow_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  const std::vector<std::pair<int, std::function<void()>>> criteria = {
      {1, [&] { determinism(tmp); }},
      {2, retry_oracle},
      {3, replication_oracle},
      {4, detection_rates},
      {5, [&] { checkpoint_equivalence(tmp); }},
      {6, footprint_dominance},
      {7, binding_rules},
      {8, engine_semantics},
      {9, safety_replay},
  };
  for (const auto& [n, fn] : criteria) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(n, "(exception)", false, e.what());
    }
  }
  fs::remove_all(tmp);
  std::printf("%s: %d failing\n", g_failures ? "FAIL" : "PASS", g_failures);
  return g_failures ? 1 : 0;
}
