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
#include <limits>

#include "gridflow/data.hpp"
#include "gridflow/error.hpp"

namespace gridflow {

ReplicaChoice select_replica(const ReplicaCatalog& catalog, std::string_view lfn, std::string_view dest_site,
                             const Grid& grid) {
  const auto* list = catalog.replicas(lfn);
  if (!list || !catalog.available(lfn)) {
    throw Error(ErrorCode::UnknownFile, "no complete replica of '" + std::string(lfn) + "'");
  }
  std::optional<ReplicaChoice> best;
  for (const auto& r : *list) {
    if (r.partial) continue;
    const auto t = grid.transfer_time(r.site, dest_site, r.size_bytes);
    if (!t) continue;
    // list is sorted by site, so strict < keeps the smallest id on ties
    if (!best || *t < best->transfer_seconds) best = ReplicaChoice{r, *t};
  }
  if (!best) {
    throw Error(ErrorCode::Unreachable, "no replica of '" + std::string(lfn) + "' is linked to '" +
                                            std::string(dest_site) + "'");
  }
  return *best;
}

std::vector<TransferJob> stage_in(std::span<const std::string> inputs, std::string_view dest_site,
                                  const ReplicaCatalog& catalog, const Grid& grid) {
  std::vector<TransferJob> jobs;
  for (const auto& lfn : inputs) {
    if (!catalog.available(lfn)) throw Error(ErrorCode::InputUnavailable, "input data not available: '" + lfn + "'");
    if (catalog.available_at(lfn, dest_site)) continue;
    if (std::any_of(jobs.begin(), jobs.end(), [&](const TransferJob& j) { return j.lfn == lfn; })) continue;
    const auto choice = select_replica(catalog, lfn, dest_site, grid);
    jobs.push_back({lfn, choice.replica.site, std::string(dest_site), choice.replica.size_bytes, choice.transfer_seconds});
  }
  return jobs;
}

namespace {

// Site of the invoke when it cannot change at run time.
std::optional<std::string> fixed_site(const Activity& a, const Registry& registry) {
  if (a.binding.kind == Binding::Kind::Bound) {
    if (const auto* s = find_service(registry, a.binding.target)) return s->site;
    return std::nullopt;
  }
  if (a.binding.kind != Binding::Kind::PortType) return std::nullopt;
  std::optional<std::string> site;
  for (const auto& s : registry) {
    if (s.port_type != a.binding.target) continue;
    if (site && *site != s.site) return std::nullopt;
    site = s.site;
  }
  return site;
}

}  // namespace

std::vector<PlacementHint> placement_hints(const Workflow& w, const ReplicaCatalog& catalog, const Grid& grid,
                                           const Registry& registry) {
  std::map<std::string, const Activity*> by_id;
  for (const auto* a : invokes_of(w)) by_id[a->id] = a;
  std::vector<PlacementHint> hints;
  for (const auto& id : data_dependency_graph(w).topological_order()) {
    const Activity& a = *by_id.at(id);
    const auto site = fixed_site(a, registry);
    if (!site || !grid.has_site(*site)) continue;
    for (const auto& lfn : a.inputs) {
      if (producer_of(w, lfn)) continue;
      if (!catalog.available(lfn) || catalog.available_at(lfn, *site)) continue;
      PlacementHint hint{lfn, *site};
      if (std::find(hints.begin(), hints.end(), hint) == hints.end()) hints.push_back(std::move(hint));
    }
  }
  return hints;
}

CleanupPlan plan_cleanup(const Workflow& w) {
  CleanupPlan plan;
  plan.protected_files = w.final_outputs;
  for (const auto& f : w.files) {
    if (plan.protected_files.count(f.lfn)) continue;
    auto consumers = consumers_of(w, f.lfn);
    if (!consumers.empty()) plan.triggers[f.lfn] = std::move(consumers);
  }
  return plan;
}

std::vector<CleanupJob> on_task_finished(CleanupPlan& plan, std::string_view finished_task,
                                         const ReplicaCatalog& catalog) {
  std::vector<CleanupJob> jobs;
  for (auto it = plan.triggers.begin(); it != plan.triggers.end();) {
    auto& pending = it->second;
    if (pending.erase(std::string(finished_task)) == 0 || !pending.empty()) {
      ++it;
      continue;
    }
    if (const auto* list = catalog.replicas(it->first)) {
      for (const auto& r : *list) jobs.push_back({it->first, r.site, r.path, r.size_bytes});
    }
    it = plan.triggers.erase(it);
  }
  return jobs;
}

std::uint64_t placement_need(const PlacementRequest& task, std::string_view site, const ReplicaCatalog& catalog) {
  std::uint64_t need = 0;
  for (const auto& o : task.outputs) need += o.size_bytes;
  std::set<std::string> seen;
  for (const auto& lfn : task.inputs) {
    if (!seen.insert(lfn).second || catalog.at_site(lfn, site)) continue;
    need += catalog.size_of(lfn).value_or(0);
  }
  return need;
}

std::string place_task(const PlacementRequest& task, std::span<const std::string> candidate_sites,
                       const StorageLedger& ledger, const ReplicaCatalog& catalog) {
  std::set<std::string> sites(candidate_sites.begin(), candidate_sites.end());
  std::optional<std::string> best;
  std::uint64_t best_free = 0;
  for (const auto& site : sites) {
    const auto free = ledger.free_bytes(site);
    if (free < placement_need(task, site, catalog)) continue;
    if (!best || free > best_free) {
      best = site;
      best_free = free;
    }
  }
  if (!best) throw Error(ErrorCode::StorageExceeded, "no candidate site has room for the task's data");
  return *best;
}

}  // namespace gridflow
