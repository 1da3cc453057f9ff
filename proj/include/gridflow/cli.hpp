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

// Command-line driver: configuration loading, artifact persistence and the
// Monte Carlo harness behind `gridflow stats`.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridflow/engine.hpp"
#include "gridflow/error.hpp"
#include "json.hpp"

namespace gridflow {

// Stable process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,         // I/O, syntax or configuration error
  kExitInvalid = 2,       // validation violations
  kExitNoPortType = 3,    // no matching port type while planning
  kExitFaulted = 4,       // Faulted or Compensated
  kExitDeadlock = 5,
  kExitStaleCheckpoint = 6,
};

int exit_code_for(const Error& e);

struct FaultOverride {
  FaultLevel level = FaultLevel::Task;
  std::optional<double> p_task;
  std::optional<double> p_detect;
};

// "task=0.5" or "os=1.0:0.37"; an empty probability keeps the configured one.
FaultOverride parse_fault_override(const std::string& text);
std::pair<std::string, double> parse_message(const std::string& text);  // "name@t"

struct RunConfig {
  std::string workflow;
  std::string grid;
  std::string registry;
  std::optional<std::string> hierarchy;
  std::optional<std::string> faults;
  std::optional<std::string> catalog;
  std::uint64_t seed = 0;
  std::optional<std::string> checkpoint_dir;
  std::optional<std::string> archive_site;
  std::optional<std::uint64_t> store_capacity;
  std::string output_dir = "out";
  bool cleanup = true;
  std::vector<std::pair<std::string, double>> messages;
  std::vector<FaultOverride> overrides;
};

Workflow load_workflow_file(const std::string& path);
// Everything but the workflow. Throws on unreadable or malformed inputs.
RunEnvironment load_environment(const RunConfig& config);

struct StatsSummary {
  std::uint64_t seed_from = 0;
  std::uint64_t seed_to = 0;
  int runs = 0;
  int completed = 0;
  std::map<int, int> exit_codes;
  double makespan_sum = 0.0;
  std::map<FaultLevel, LevelCounts> faults;
  long retries = 0;
  long rebinds = 0;
  long replicas_launched = 0;
  std::map<std::string, double> peak_sum;

  // Commutative merge of one run.
  void add(const RunReport& r);
  double success_fraction() const { return runs ? static_cast<double>(completed) / runs : 0.0; }
};

nlohmann::ordered_json stats_to_json(const StatsSummary& s);

// Runs seeds [from, to] as independent instances on `threads` workers.
StatsSummary run_stats(const Workflow& w, const RunEnvironment& base, std::uint64_t from, std::uint64_t to,
                       unsigned threads = 0);

int cli_main(int argc, char** argv);

}  // namespace gridflow
