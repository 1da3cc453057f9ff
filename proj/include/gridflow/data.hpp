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

// Replica catalog, storage accounting, staging, placement and early cleanup.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridflow/binding.hpp"
#include "gridflow/grid.hpp"
#include "gridflow/workflow.hpp"
#include "json.hpp"

namespace gridflow {

struct Replica {
  std::string site;
  std::string path;
  std::uint64_t size_bytes = 0;
  bool partial = false;
  bool operator==(const Replica&) const = default;
};

std::string replica_path(std::string_view site, std::string_view lfn);

class ReplicaCatalog {
 public:
  const std::map<std::string, std::vector<Replica>>& entries() const noexcept { return entries_; }

  const std::vector<Replica>* replicas(std::string_view lfn) const;
  const Replica* at_site(std::string_view lfn, std::string_view site) const;
  // A complete (non-partial) copy exists somewhere.
  bool available(std::string_view lfn) const;
  bool available_at(std::string_view lfn, std::string_view site) const;
  std::optional<std::uint64_t> size_of(std::string_view lfn) const;

  // Raw mutation; accounting lives in register_replica/remove_replica.
  void put(std::string lfn, Replica replica);
  bool erase(std::string_view lfn, std::string_view site);
  void erase_all(std::string_view lfn);

  bool operator==(const ReplicaCatalog&) const = default;

 private:
  std::map<std::string, std::vector<Replica>> entries_;
};

// {"lfn": [{"site","path","size_bytes","partial"}], ...}
nlohmann::ordered_json catalog_to_json(const ReplicaCatalog& catalog);
ReplicaCatalog catalog_from_json(const nlohmann::json& j);

class StorageLedger {
 public:
  struct Sample {
    double at = 0.0;
    std::uint64_t used = 0;
  };
  struct Account {
    std::uint64_t capacity = 0;
    std::uint64_t used = 0;
    std::uint64_t reserved = 0;
    std::uint64_t peak = 0;
    double peak_at = 0.0;
    std::vector<Sample> history;
  };

  StorageLedger() = default;
  explicit StorageLedger(const Grid& grid, std::optional<std::uint64_t> store_capacity = std::nullopt);

  const std::map<std::string, Account>& sites() const noexcept { return sites_; }
  const Account& site(std::string_view id) const;
  const Account& store() const noexcept { return store_; }

  std::uint64_t free_bytes(std::string_view site) const;  // capacity - used - reserved
  bool fits(std::string_view site, std::uint64_t bytes) const { return free_bytes(site) >= bytes; }

  void reserve(std::string_view site, std::uint64_t bytes);
  void release(std::string_view site, std::uint64_t bytes);
  // Throws StorageExceeded when used would pass capacity.
  void add(std::string_view site, std::uint64_t bytes, double at);
  void remove(std::string_view site, std::uint64_t bytes, double at);

  // Checkpoint store; unbounded unless a capacity was given.
  bool store_fits(std::uint64_t bytes) const;
  void store_add(std::uint64_t bytes, double at);

 private:
  Account& mutable_site(std::string_view id);
  static void record(Account& a, double at);

  std::map<std::string, Account> sites_;
  Account store_;
  bool store_bounded_ = false;
};

// Peak-usage report: {"site": {"peak_bytes","at"}}
nlohmann::ordered_json peak_report(const StorageLedger& ledger);

// Appends a replica and charges the ledger. Re-registering at a site that
// already holds the lfn only upgrades a partial copy. Throws SizeMismatch,
// StorageExceeded.
void register_replica(ReplicaCatalog& catalog, StorageLedger& ledger, const std::string& lfn, const std::string& site,
                      std::uint64_t size_bytes, double now, bool partial = false);
// Returns the bytes freed.
std::uint64_t remove_replica(ReplicaCatalog& catalog, StorageLedger& ledger, std::string_view lfn,
                             std::string_view site, double now);

struct ReplicaChoice {
  Replica replica;
  double transfer_seconds = 0.0;
};

// Cheapest complete replica to bring to dest_site (ties: smallest site id).
// Throws UnknownFile, Unreachable.
ReplicaChoice select_replica(const ReplicaCatalog& catalog, std::string_view lfn, std::string_view dest_site,
                             const Grid& grid);

struct TransferJob {
  std::string lfn;
  std::string from_site;
  std::string to_site;
  std::uint64_t bytes = 0;
  double seconds = 0.0;
  bool operator==(const TransferJob&) const = default;
};

// One transfer per input lacking a complete replica at dest_site.
// Throws InputUnavailable(lfn), Unreachable.
std::vector<TransferJob> stage_in(std::span<const std::string> inputs, std::string_view dest_site,
                                  const ReplicaCatalog& catalog, const Grid& grid);

struct PlacementHint {
  std::string lfn;
  std::string dest_site;
  bool operator==(const PlacementHint&) const = default;
};

// Prefetch list for workflow inputs (files no invoke produces) whose consumer
// site is fixed at plan time, in topological order of the consumers.
std::vector<PlacementHint> placement_hints(const Workflow& w, const ReplicaCatalog& catalog, const Grid& grid,
                                           const Registry& registry);

struct CleanupPlan {
  std::map<std::string, std::set<std::string>> triggers;  // lfn -> consumers still to finish
  std::set<std::string> protected_files;                  // final outputs
};

struct CleanupJob {
  std::string lfn;
  std::string site;
  std::string path;
  std::uint64_t bytes = 0;
  bool operator==(const CleanupJob&) const = default;
};

CleanupPlan plan_cleanup(const Workflow& w);

// Marks `finished_task` done; emits jobs for every replica of each lfn whose
// last consumer this was.
std::vector<CleanupJob> on_task_finished(CleanupPlan& plan, std::string_view finished_task,
                                         const ReplicaCatalog& catalog);

struct PlacementRequest {
  std::vector<OutputSpec> outputs;
  std::vector<std::string> inputs;
};

// Bytes the task would add at `site`: outputs plus inputs it must stage there.
std::uint64_t placement_need(const PlacementRequest& task, std::string_view site, const ReplicaCatalog& catalog);

// Site with the most free bytes among those that fit the task (ties: smallest
// id). Throws StorageExceeded.
std::string place_task(const PlacementRequest& task, std::span<const std::string> candidate_sites,
                       const StorageLedger& ledger, const ReplicaCatalog& catalog);

struct ProvenanceRecord {
  std::string lfn;
  std::string producing_activity;
  std::string service_id;
  VariableMap parameters;
  std::vector<std::string> input_lfns;
  double produced_at = 0.0;
  bool operator==(const ProvenanceRecord&) const = default;
};

nlohmann::ordered_json provenance_to_json(const ProvenanceRecord& record);
ProvenanceRecord provenance_from_json(const nlohmann::json& j);

}  // namespace gridflow
