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

#include "gridflow/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "common/json_util.hpp"

namespace gridflow {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::InvalidWorkflow:
    case ErrorCode::AbstractActivityRemains: return kExitInvalid;
    case ErrorCode::NoMatchingPortType: return kExitNoPortType;
    case ErrorCode::StaleLightCheckpoint: return kExitStaleCheckpoint;
    default: return kExitError;
  }
}

FaultOverride parse_fault_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "fault override '" + text + "' needs level=p");
  FaultOverride o;
  const auto level = parse_level(text.substr(0, eq));
  if (!level) throw Error(ErrorCode::InvalidConfig, "unknown fault level in '" + text + "'");
  o.level = *level;
  const std::string rest = text.substr(eq + 1);
  const auto colon = rest.find(':');
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || v < 0 || v > 1) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad probability in '" + text + "'");
    }
  };
  const std::string p = rest.substr(0, colon);
  if (!p.empty()) o.p_task = number(p);
  if (colon != std::string::npos) o.p_detect = number(rest.substr(colon + 1));
  return o;
}

std::pair<std::string, double> parse_message(const std::string& text) {
  const auto at = text.rfind('@');
  if (at == std::string::npos || at == 0) throw Error(ErrorCode::InvalidConfig, "message '" + text + "' needs name@t");
  try {
    std::size_t used = 0;
    const auto tail = text.substr(at + 1);
    const double t = std::stod(tail, &used);
    if (used != tail.size() || t < 0) throw std::invalid_argument(tail);
    return {text.substr(0, at), t};
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig, "bad time in message '" + text + "'");
  }
}

Workflow load_workflow_file(const std::string& path) { return parse_workflow(detail::read_file(path)); }

RunEnvironment load_environment(const RunConfig& c) {
  RunEnvironment env;
  env.grid = load_grid(detail::read_file(c.grid));
  env.registry = load_registry(detail::read_file(c.registry));
  if (c.hierarchy) env.hierarchy = load_hierarchy(detail::read_file(*c.hierarchy));
  if (c.faults) env.faults = load_fault_config(detail::read_file(*c.faults));
  for (const auto& o : c.overrides) {
    if (o.p_task) env.faults.at(o.level).probability_per_task = *o.p_task;
    if (o.p_detect) env.faults.at(o.level).detection_probability = *o.p_detect;
  }
  if (c.catalog) env.catalog = catalog_from_json(detail::parse_text(detail::read_file(*c.catalog)));
  if (c.archive_site && !env.grid.has_site(*c.archive_site)) {
    throw Error(ErrorCode::InvalidConfig, "archive site '" + *c.archive_site + "' is not in the grid");
  }
  env.seed = c.seed;
  env.cleanup = c.cleanup;
  env.archive_site = c.archive_site;
  env.store_capacity = c.store_capacity;
  env.checkpoint_dir = c.checkpoint_dir;
  env.messages = c.messages;
  return env;
}

// ---------------------------------------------------------------------------

void StatsSummary::add(const RunReport& r) {
  ++runs;
  if (r.state == ProcessState::Completed) ++completed;
  ++exit_codes[exit_code(r)];
  makespan_sum += r.makespan;
  for (const auto& [level, c] : r.faults) {
    auto& t = faults[level];
    t.injected += c.injected;
    t.detected += c.detected;
    t.raised += c.raised;
  }
  retries += r.retries;
  rebinds += r.rebinds;
  replicas_launched += r.replicas_launched;
  for (const auto& [site, bytes] : r.peak_storage) peak_sum[site] += static_cast<double>(bytes);
}

ojson stats_to_json(const StatsSummary& s) {
  const double n = s.runs ? static_cast<double>(s.runs) : 1.0;
  ojson faults = ojson::object();
  for (FaultLevel level : kFaultLevels) {
    LevelCounts c;
    if (auto it = s.faults.find(level); it != s.faults.end()) c = it->second;
    ojson f = {{"injected", c.injected}, {"detected", c.detected}, {"raised", c.raised}};
    f["detected_fraction"] = c.injected ? ojson(static_cast<double>(c.detected) / c.injected) : ojson(nullptr);
    faults[std::string(level_name(level))] = std::move(f);
  }
  ojson codes = ojson::object();
  for (const auto& [code, count] : s.exit_codes) codes[std::to_string(code)] = count;
  ojson peak = ojson::object();
  for (const auto& [site, sum] : s.peak_sum) peak[site] = sum / n;
  return {{"seeds", {{"from", s.seed_from}, {"to", s.seed_to}}},
          {"runs", s.runs},
          {"completed", s.completed},
          {"success_fraction", s.success_fraction()},
          {"failure_fraction", s.runs ? 1.0 - s.success_fraction() : 0.0},
          {"mean_makespan", s.makespan_sum / n},
          {"exit_codes", std::move(codes)},
          {"faults", std::move(faults)},
          {"retries", s.retries},
          {"rebinds", s.rebinds},
          {"replicas_launched", s.replicas_launched},
          {"mean_peak_storage", std::move(peak)}};
}

StatsSummary run_stats(const Workflow& w, const RunEnvironment& base, std::uint64_t from, std::uint64_t to,
                       unsigned threads) {
  if (to < from) throw Error(ErrorCode::InvalidConfig, "empty seed range");
  const std::uint64_t count = to - from + 1;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, count));

  // Per-seed reports merged in seed order keep the floating sums reproducible.
  std::vector<RunReport> reports(count);
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::uint64_t i = t; i < count; i += threads) {
          RunEnvironment env = base;
          env.seed = from + i;
          env.checkpoint_dir.reset();
          Engine engine(w, std::move(env));
          reports[i] = engine.run_to_completion();
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  StatsSummary s;
  s.seed_from = from;
  s.seed_to = to;
  for (const auto& r : reports) s.add(r);
  return s;
}

// ---------------------------------------------------------------------------

namespace {

void write_text(const fs::path& path, const std::string& text, bool append = false) {
  std::ofstream out(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write to '" + path.string() + "' failed");
}

std::string json_text(const ojson& j) { return j.dump(2) + "\n"; }

// Report for a run that may have been halted before terminating.
RunReport current_report(const Engine& e) {
  RunReport r = e.report();
  if (!e.terminal()) {
    r.state = e.instance().state;
    r.makespan = e.now();
    for (const auto& [site, a] : e.ledger().sites()) r.peak_storage[site] = a.peak;
  }
  return r;
}

void write_artifacts(const Engine& e, const fs::path& dir, std::uint64_t seq_offset, bool append) {
  std::string events;
  for (auto ev : e.log()) {
    ev.seq += seq_offset;
    events += event_line(ev);
    events += '\n';
  }
  write_text(dir / "events.jsonl", events, append);
  write_text(dir / "report.json", json_text(report_to_json(current_report(e))));
  std::string prov;
  for (const auto& p : e.provenance()) prov += provenance_to_json(p).dump() + "\n";
  write_text(dir / "provenance.jsonl", prov);
  write_text(dir / "catalog.json", json_text(catalog_to_json(e.catalog())));
  write_text(dir / "peak.json", json_text(peak_report(e.ledger())));
}

// Seq of the last line of an existing log, if any.
std::optional<std::uint64_t> last_seq(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  std::string last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  if (last.empty()) return std::nullopt;
  try {
    return nlohmann::json::parse(last).at("seq").get<std::uint64_t>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::IoError, "existing log '" + path.string() + "' has a malformed last line");
  }
}

int finish(const Engine& e, bool halted) {
  const auto r = current_report(e);
  std::cout << "state " << state_name(r.state) << " makespan " << r.makespan << " events " << e.log().size()
            << (halted ? " (halted)" : "") << "\n";
  return halted ? kExitOk : exit_code(r);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoError, "cannot create directory '" + dir + "'");
}

// Steps until terminal or until `halt_after` checkpoints were taken.
bool drive(Engine& e, int halt_after) {
  int taken = 0;
  while (!e.terminal()) {
    for (const auto& ev : e.step()) {
      if (ev.kind == EventKind::CheckpointTaken && !ev.detail.contains("error")) ++taken;
    }
    if (halt_after > 0 && taken >= halt_after && !e.terminal()) return true;
  }
  return false;
}

struct Options {
  RunConfig config;
  std::vector<std::string> faults;
  std::vector<std::string> messages;
  bool no_cleanup = false;
  int halt_after = 0;
};

void add_run_options(CLI::App& cmd, Options& o, bool workflow_required) {
  auto* wf = cmd.add_option("--workflow", o.config.workflow, "Workflow document")->check(CLI::ExistingFile);
  if (workflow_required) wf->required();
  cmd.add_option("--grid", o.config.grid, "Grid description")->required()->check(CLI::ExistingFile);
  cmd.add_option("--registry", o.config.registry, "Service registry")->required()->check(CLI::ExistingFile);
  cmd.add_option("--hierarchy", o.config.hierarchy, "Concept hierarchy")->check(CLI::ExistingFile);
  cmd.add_option("--faults", o.config.faults, "Fault injection config")->check(CLI::ExistingFile);
  cmd.add_option("--catalog", o.config.catalog, "Initial replica catalog")->check(CLI::ExistingFile);
  cmd.add_option("--seed", o.config.seed, "Run seed");
  cmd.add_option("--checkpoint-dir", o.config.checkpoint_dir, "Checkpoint store directory");
  cmd.add_option("--archive-site", o.config.archive_site, "Site that receives final outputs");
  cmd.add_option("--store-capacity", o.config.store_capacity, "Checkpoint store capacity in bytes");
  cmd.add_option("--fault", o.faults, "Override level=p_task[:p_detect]");
  cmd.add_option("--message", o.messages, "Inject message name@t");
  cmd.add_flag("--no-cleanup", o.no_cleanup, "Keep intermediate files");
  cmd.add_option("-o,--output", o.config.output_dir, "Output directory");
}

void finalize_options(Options& o) {
  for (const auto& f : o.faults) o.config.overrides.push_back(parse_fault_override(f));
  for (const auto& m : o.messages) o.config.messages.push_back(parse_message(m));
  o.config.cleanup = !o.no_cleanup;
}

int cmd_validate(const std::string& path) {
  const auto w = load_workflow_file(path);
  const auto report = validate(w);
  if (report.ok()) {
    std::cout << "ok " << w.id << "\n";
    return kExitOk;
  }
  for (const auto& v : report.violations) {
    std::cout << violation_name(v.kind) << " " << v.subject << ": " << v.message << "\n";
  }
  return kExitInvalid;
}

int cmd_plan(const std::string& path, const std::string& hierarchy, const std::string& registry,
             const std::string& out) {
  const auto w = load_workflow_file(path);
  const auto report = validate(w);
  if (!report.ok()) {
    for (const auto& v : report.violations) std::cerr << violation_name(v.kind) << " " << v.subject << ": " << v.message << "\n";
    return kExitInvalid;
  }
  const auto h = load_hierarchy(detail::read_file(hierarchy));
  const auto r = load_registry(detail::read_file(registry));
  const auto result = generate_concrete_with_report(w, h, r);
  ojson bindings = ojson::array();
  for (const auto& c : result.choices) {
    bindings.push_back({{"activity", c.activity_id},
                        {"concept", c.concept_name},
                        {"port_type", c.port_type},
                        {"candidates", c.candidates}});
  }
  write_text(out, serialize_workflow(result.workflow));
  write_text(out + ".bindings.json", json_text(bindings));
  std::cout << "wrote " << out << " (" << result.choices.size() << " bindings)\n";
  return kExitOk;
}

int cmd_run(Options& o) {
  finalize_options(o);
  const auto w = load_workflow_file(o.config.workflow);
  ensure_dir(o.config.output_dir);
  if (!o.config.checkpoint_dir) o.config.checkpoint_dir = (fs::path(o.config.output_dir) / "checkpoints").string();
  ensure_dir(*o.config.checkpoint_dir);
  Engine e(w, load_environment(o.config));
  const bool halted = drive(e, o.halt_after);
  write_artifacts(e, o.config.output_dir, 0, false);
  return finish(e, halted);
}

int cmd_resume(Options& o, const std::string& checkpoint_path) {
  finalize_options(o);
  const auto ck = read_checkpoint(checkpoint_path);
  ensure_dir(o.config.output_dir);
  if (!o.config.checkpoint_dir) o.config.checkpoint_dir = (fs::path(o.config.output_dir) / "checkpoints").string();
  ensure_dir(*o.config.checkpoint_dir);

  std::optional<ReplicaCatalog> current;
  if (o.config.catalog) current = catalog_from_json(detail::parse_text(detail::read_file(*o.config.catalog)));
  RunConfig c = o.config;
  c.catalog.reset();
  auto env = load_environment(c);
  if (!o.config.workflow.empty()) {
    const auto w = load_workflow_file(o.config.workflow);
    const auto& recorded = ck.snapshot.at("instance").at("workflow");
    if (workflow_to_json(w) != recorded) {
      throw Error(ErrorCode::InvalidConfig, "workflow '" + w.id + "' differs from the one in the checkpoint");
    }
  }
  Engine e = Engine::resume(ck, std::move(env), std::move(current));
  const bool halted = drive(e, o.halt_after);
  const auto events = fs::path(o.config.output_dir) / "events.jsonl";
  const auto prev = last_seq(events);
  write_artifacts(e, o.config.output_dir, prev ? *prev + 1 : 0, prev.has_value());
  return finish(e, halted);
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const auto v = std::stoull(text);
      return {v, v};
    }
    return {std::stoull(text.substr(0, dots)), std::stoull(text.substr(dots + 2))};
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig, "bad seed range '" + text + "'");
  }
}

int cmd_stats(Options& o, const std::string& seeds, unsigned threads) {
  finalize_options(o);
  const auto [from, to] = parse_seed_range(seeds);
  if (to < from) throw Error(ErrorCode::InvalidConfig, "empty seed range '" + seeds + "'");
  const auto w = load_workflow_file(o.config.workflow);
  auto env = load_environment(o.config);
  const auto summary = run_stats(w, env, from, to, threads);
  ensure_dir(o.config.output_dir);
  const auto text = json_text(stats_to_json(summary));
  write_text(fs::path(o.config.output_dir) / "stats.json", text);
  std::cout << text;
  return kExitOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"gridflow: grid workflow engine simulator"};
  app.require_subcommand(1);

  std::string default_out = "out";
  if (const char* env = std::getenv("GRIDFLOW_OUTPUT"); env && *env) default_out = env;

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a workflow document");
  validate_cmd->add_option("workflow", validate_path, "Workflow document")->required();

  std::string plan_path, plan_hierarchy, plan_registry, plan_out;
  auto* plan_cmd = app.add_subcommand("plan", "Bind abstract activities to port types");
  plan_cmd->add_option("workflow", plan_path, "Abstract workflow")->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("--hierarchy", plan_hierarchy, "Concept hierarchy")->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("--registry", plan_registry, "Service registry")->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("-o,--output", plan_out, "Concrete workflow output")->required();

  Options run_opts;
  run_opts.config.output_dir = default_out;
  auto* run_cmd = app.add_subcommand("run", "Simulate a workflow to completion");
  add_run_options(*run_cmd, run_opts, true);
  run_cmd->add_option("--halt-after-checkpoints", run_opts.halt_after, "Stop after this many checkpoints");

  Options resume_opts;
  resume_opts.config.output_dir = default_out;
  std::string checkpoint_path;
  auto* resume_cmd = app.add_subcommand("resume", "Continue a run from a checkpoint file");
  resume_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  add_run_options(*resume_cmd, resume_opts, false);
  resume_cmd->add_option("--halt-after-checkpoints", resume_opts.halt_after, "Stop after this many checkpoints");

  Options stats_opts;
  stats_opts.config.output_dir = default_out;
  std::string seeds;
  unsigned threads = 0;
  auto* stats_cmd = app.add_subcommand("stats", "Aggregate runs over a seed range");
  stats_cmd->add_option("--seeds", seeds, "Seed range A..B")->required();
  stats_cmd->add_option("--threads", threads, "Worker threads (0: all cores)");
  add_run_options(*stats_cmd, stats_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }

  try {
    if (*validate_cmd) return cmd_validate(validate_path);
    if (*plan_cmd) return cmd_plan(plan_path, plan_hierarchy, plan_registry, plan_out);
    if (*run_cmd) return cmd_run(run_opts);
    if (*resume_cmd) return cmd_resume(resume_opts, checkpoint_path);
    if (*stats_cmd) return cmd_stats(stats_opts, seeds, threads);
  } catch (const StaleLightCheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& lfn : e.missing()) std::cerr << "  missing " << lfn << "\n";
    return kExitStaleCheckpoint;
  } catch (const NoMatchingPortTypeError& e) {
    std::cerr << "error: no port type matches concept '" << e.concept_name() << "' of '" << e.activity_id() << "'\n";
    return kExitNoPortType;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace gridflow
