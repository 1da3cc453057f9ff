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

#include "common/json_util.hpp"
#include "gridflow/data.hpp"
#include "gridflow/error.hpp"

namespace gridflow {

using detail::json;
using ojson = nlohmann::ordered_json;

std::string replica_path(std::string_view site, std::string_view lfn) {
  std::string out = "/";
  out += site;
  out += '/';
  out += lfn;
  return out;
}

const std::vector<Replica>* ReplicaCatalog::replicas(std::string_view lfn) const {
  auto it = entries_.find(std::string(lfn));
  return it == entries_.end() || it->second.empty() ? nullptr : &it->second;
}

const Replica* ReplicaCatalog::at_site(std::string_view lfn, std::string_view site) const {
  const auto* list = replicas(lfn);
  if (!list) return nullptr;
  for (const auto& r : *list) {
    if (r.site == site) return &r;
  }
  return nullptr;
}

bool ReplicaCatalog::available(std::string_view lfn) const {
  const auto* list = replicas(lfn);
  return list && std::any_of(list->begin(), list->end(), [](const Replica& r) { return !r.partial; });
}

bool ReplicaCatalog::available_at(std::string_view lfn, std::string_view site) const {
  const auto* r = at_site(lfn, site);
  return r && !r->partial;
}

std::optional<std::uint64_t> ReplicaCatalog::size_of(std::string_view lfn) const {
  const auto* list = replicas(lfn);
  if (!list) return std::nullopt;
  return list->front().size_bytes;
}

void ReplicaCatalog::put(std::string lfn, Replica replica) {
  auto& list = entries_[std::move(lfn)];
  for (auto& r : list) {
    if (r.site == replica.site) {
      r = std::move(replica);
      return;
    }
  }
  list.push_back(std::move(replica));
  std::sort(list.begin(), list.end(), [](const Replica& a, const Replica& b) { return a.site < b.site; });
}

bool ReplicaCatalog::erase(std::string_view lfn, std::string_view site) {
  auto it = entries_.find(std::string(lfn));
  if (it == entries_.end()) return false;
  auto& list = it->second;
  auto pos = std::find_if(list.begin(), list.end(), [&](const Replica& r) { return r.site == site; });
  if (pos == list.end()) return false;
  list.erase(pos);
  if (list.empty()) entries_.erase(it);
  return true;
}

void ReplicaCatalog::erase_all(std::string_view lfn) { entries_.erase(std::string(lfn)); }

ojson catalog_to_json(const ReplicaCatalog& catalog) {
  ojson j = ojson::object();
  for (const auto& [lfn, list] : catalog.entries()) {
    ojson arr = ojson::array();
    for (const auto& r : list) {
      arr.push_back({{"site", r.site}, {"path", r.path}, {"size_bytes", r.size_bytes}, {"partial", r.partial}});
    }
    j[lfn] = std::move(arr);
  }
  return j;
}

ReplicaCatalog catalog_from_json(const json& j) {
  detail::expect_object(j, "catalog");
  ReplicaCatalog catalog;
  for (const auto& [lfn, list] : j.items()) {
    std::optional<std::uint64_t> size;
    for (const auto& entry : detail::expect_array(list, lfn)) {
      Replica r;
      r.site = detail::get_string(entry, "site", lfn);
      r.size_bytes = detail::get_uint(entry, "size_bytes", lfn);
      r.path = replica_path(r.site, lfn);
      if (const auto* p = detail::optional_field(entry, "path")) r.path = detail::as_string(*p, lfn + ".path");
      if (const auto* p = detail::optional_field(entry, "partial")) r.partial = detail::as_bool(*p, lfn + ".partial");
      if (size && *size != r.size_bytes) {
        throw Error(ErrorCode::SizeMismatch, "replicas of '" + lfn + "' disagree on size");
      }
      if (catalog.at_site(lfn, r.site)) {
        throw Error(ErrorCode::InvalidConfig, "'" + lfn + "' listed twice at site '" + r.site + "'");
      }
      size = r.size_bytes;
      catalog.put(lfn, std::move(r));
    }
  }
  return catalog;
}

StorageLedger::StorageLedger(const Grid& grid, std::optional<std::uint64_t> store_capacity) {
  for (const auto& s : grid.sites()) sites_[s.site_id].capacity = s.storage_capacity_bytes;
  if (store_capacity) {
    store_bounded_ = true;
    store_.capacity = *store_capacity;
  }
}

const StorageLedger::Account& StorageLedger::site(std::string_view id) const {
  auto it = sites_.find(std::string(id));
  if (it == sites_.end()) throw Error(ErrorCode::InvalidGrid, "unknown site '" + std::string(id) + "'");
  return it->second;
}

StorageLedger::Account& StorageLedger::mutable_site(std::string_view id) {
  return const_cast<Account&>(static_cast<const StorageLedger*>(this)->site(id));
}

std::uint64_t StorageLedger::free_bytes(std::string_view id) const {
  const auto& a = site(id);
  const std::uint64_t taken = a.used + a.reserved;
  return taken >= a.capacity ? 0 : a.capacity - taken;
}

void StorageLedger::reserve(std::string_view id, std::uint64_t bytes) { mutable_site(id).reserved += bytes; }

void StorageLedger::release(std::string_view id, std::uint64_t bytes) {
  auto& a = mutable_site(id);
  a.reserved -= std::min(a.reserved, bytes);
}

void StorageLedger::record(Account& a, double at) {
  if (!a.history.empty() && a.history.back().at == at) {
    a.history.back().used = a.used;
  } else {
    a.history.push_back({at, a.used});
  }
  if (a.used > a.peak) {
    a.peak = a.used;
    a.peak_at = at;
  }
}

void StorageLedger::add(std::string_view id, std::uint64_t bytes, double at) {
  auto& a = mutable_site(id);
  if (a.used + bytes > a.capacity) {
    throw Error(ErrorCode::StorageExceeded, "site '" + std::string(id) + "' cannot hold " + std::to_string(bytes) +
                                                " more bytes (" + std::to_string(a.capacity - a.used) + " free)");
  }
  a.used += bytes;
  record(a, at);
}

void StorageLedger::remove(std::string_view id, std::uint64_t bytes, double at) {
  auto& a = mutable_site(id);
  a.used -= std::min(a.used, bytes);
  record(a, at);
}

bool StorageLedger::store_fits(std::uint64_t bytes) const {
  return !store_bounded_ || store_.used + bytes <= store_.capacity;
}

void StorageLedger::store_add(std::uint64_t bytes, double at) {
  if (!store_fits(bytes)) {
    throw Error(ErrorCode::StorageExceeded, "checkpoint store cannot hold " + std::to_string(bytes) + " more bytes");
  }
  store_.used += bytes;
  record(store_, at);
}

ojson peak_report(const StorageLedger& ledger) {
  ojson j = ojson::object();
  for (const auto& [id, a] : ledger.sites()) j[id] = {{"peak_bytes", a.peak}, {"at", a.peak_at}};
  return j;
}

void register_replica(ReplicaCatalog& catalog, StorageLedger& ledger, const std::string& lfn, const std::string& site,
                      std::uint64_t size_bytes, double now, bool partial) {
  if (const auto existing = catalog.size_of(lfn); existing && *existing != size_bytes) {
    throw Error(ErrorCode::SizeMismatch, "'" + lfn + "' is " + std::to_string(*existing) + " bytes, not " +
                                             std::to_string(size_bytes));
  }
  if (const auto* r = catalog.at_site(lfn, site)) {
    if (r->partial && !partial) catalog.put(lfn, Replica{site, r->path, size_bytes, false});
    return;
  }
  ledger.add(site, size_bytes, now);
  catalog.put(lfn, Replica{site, replica_path(site, lfn), size_bytes, partial});
}

std::uint64_t remove_replica(ReplicaCatalog& catalog, StorageLedger& ledger, std::string_view lfn,
                             std::string_view site, double now) {
  const auto* r = catalog.at_site(lfn, site);
  if (!r) return 0;
  const auto bytes = r->size_bytes;
  catalog.erase(lfn, site);
  ledger.remove(site, bytes, now);
  return bytes;
}

ojson provenance_to_json(const ProvenanceRecord& record) {
  ojson params = ojson::object();
  for (const auto& [name, value] : record.parameters) params[name] = value_to_json(value);
  return {{"lfn", record.lfn},
          {"producing_activity", record.producing_activity},
          {"service_id", record.service_id},
          {"parameters", std::move(params)},
          {"input_lfns", record.input_lfns},
          {"produced_at", record.produced_at}};
}

ProvenanceRecord provenance_from_json(const json& j) {
  ProvenanceRecord r;
  r.lfn = detail::get_string(j, "lfn", "provenance");
  r.producing_activity = detail::get_string(j, "producing_activity", "provenance");
  r.service_id = detail::get_string(j, "service_id", "provenance");
  for (const auto& [name, value] : detail::expect_object(detail::require(j, "parameters", "provenance"), "parameters").items()) {
    r.parameters[name] = value_from_json(value, name);
  }
  for (const auto& lfn : detail::expect_array(detail::require(j, "input_lfns", "provenance"), "input_lfns")) {
    r.input_lfns.push_back(detail::as_string(lfn, "input_lfns"));
  }
  r.produced_at = detail::get_number(j, "produced_at", "provenance");
  return r;
}

}  // namespace gridflow
