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

#include "gridflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "common/json_util.hpp"
#include "gridflow/error.hpp"

namespace gridflow {

using detail::json;

Grid::Grid(std::vector<Site> sites, std::vector<Link> links) : sites_(std::move(sites)), links_(std::move(links)) {
  std::set<std::string> ids;
  for (const auto& s : sites_) {
    if (!ids.insert(s.site_id).second) throw Error(ErrorCode::DuplicateSite, "site '" + s.site_id + "' is declared twice");
    if (s.slots < 1) throw Error(ErrorCode::InvalidGrid, "site '" + s.site_id + "' needs at least one slot");
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& l : links_) {
    for (const auto* end : {&l.from_site, &l.to_site}) {
      if (!ids.count(*end)) throw Error(ErrorCode::DanglingLink, "link endpoint '" + *end + "' is not a declared site");
    }
    if (l.from_site == l.to_site) throw Error(ErrorCode::InvalidGrid, "self-link on site '" + l.from_site + "'");
    if (!(l.bandwidth_bytes_per_s > 0)) {
      throw Error(ErrorCode::InvalidGrid, "link " + l.from_site + " -> " + l.to_site + " needs bandwidth > 0");
    }
    if (l.latency_s < 0) throw Error(ErrorCode::InvalidGrid, "link " + l.from_site + " -> " + l.to_site + " has negative latency");
    if (!seen.emplace(l.from_site, l.to_site).second) {
      throw Error(ErrorCode::InvalidGrid, "link " + l.from_site + " -> " + l.to_site + " is listed twice");
    }
  }
}

const Site* Grid::site(std::string_view id) const {
  for (const auto& s : sites_) {
    if (s.site_id == id) return &s;
  }
  return nullptr;
}

const Link* Grid::link(std::string_view from, std::string_view to) const {
  const Link* reverse = nullptr;
  for (const auto& l : links_) {
    if (l.from_site == from && l.to_site == to) return &l;
    if (l.from_site == to && l.to_site == from) reverse = &l;
  }
  return reverse;
}

std::optional<double> Grid::transfer_time(std::string_view from, std::string_view to, std::uint64_t bytes) const {
  if (from == to) return 0.0;
  const Link* l = link(from, to);
  if (!l) return std::nullopt;
  return l->latency_s + static_cast<double>(bytes) / l->bandwidth_bytes_per_s;
}

Grid load_grid(std::string_view config_text) {
  const json doc = detail::parse_text(config_text);
  std::vector<Site> sites;
  for (const auto& s : detail::expect_array(detail::require(doc, "sites", "grid"), "sites")) {
    Site site;
    site.site_id = detail::get_string(s, "site_id", "sites");
    site.slots = static_cast<int>(detail::get_int(s, "slots", "sites"));
    site.storage_capacity_bytes = detail::get_uint(s, "storage_capacity_bytes", "sites");
    sites.push_back(std::move(site));
  }
  std::vector<Link> links;
  if (const auto* ls = detail::optional_field(doc, "links")) {
    for (const auto& l : detail::expect_array(*ls, "links")) {
      Link link;
      link.from_site = detail::get_string(l, "from", "links");
      link.to_site = detail::get_string(l, "to", "links");
      link.bandwidth_bytes_per_s = detail::get_number(l, "bandwidth_bps", "links");
      if (const auto* lat = detail::optional_field(l, "latency_s")) link.latency_s = detail::as_number(*lat, "links.latency_s");
      links.push_back(std::move(link));
    }
  }
  return Grid(std::move(sites), std::move(links));
}

nlohmann::ordered_json grid_to_json(const Grid& grid) {
  nlohmann::ordered_json j;
  j["sites"] = nlohmann::ordered_json::array();
  for (const auto& s : grid.sites()) {
    j["sites"].push_back({{"site_id", s.site_id}, {"slots", s.slots}, {"storage_capacity_bytes", s.storage_capacity_bytes}});
  }
  j["links"] = nlohmann::ordered_json::array();
  for (const auto& l : grid.links()) {
    j["links"].push_back(
        {{"from", l.from_site}, {"to", l.to_site}, {"bandwidth_bps", l.bandwidth_bytes_per_s}, {"latency_s", l.latency_s}});
  }
  return j;
}

FaultInjectorConfig::FaultInjectorConfig() {
  for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = LevelInjection{0.0, kDefaultDetection[i]};
}

FaultInjectorConfig load_fault_config(std::string_view text) {
  const json doc = detail::parse_text(text);
  detail::expect_object(doc, "faults");
  FaultInjectorConfig cfg;
  for (const auto& [name, entry] : doc.items()) {
    const auto level = parse_level(name);
    if (!level) throw Error(ErrorCode::InvalidConfig, "unknown fault level '" + name + "'");
    auto& slot = cfg.at(*level);
    if (const auto* p = detail::optional_field(entry, "p_task")) slot.probability_per_task = detail::as_number(*p, name);
    if (const auto* p = detail::optional_field(entry, "p_detect")) slot.detection_probability = detail::as_number(*p, name);
    for (double v : {slot.probability_per_task, slot.detection_probability}) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidConfig, "probabilities for '" + name + "' must lie in [0, 1]");
    }
  }
  return cfg;
}

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void mix_bytes(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  // length terminator keeps ("ab","c") apart from ("a","bc")
  h ^= bytes.size();
  h *= kFnvPrime;
}

void mix_word(std::uint64_t& h, std::uint64_t word) { h = splitmix(h ^ word); }

}  // namespace

std::uint64_t substream_seed(std::uint64_t run_seed, std::string_view instance_id, std::string_view activity_id,
                             std::uint64_t attempt, std::uint64_t lane, std::uint64_t epoch) {
  std::uint64_t h = kFnvOffset;
  mix_word(h, run_seed);
  mix_bytes(h, instance_id);
  mix_bytes(h, activity_id);
  mix_word(h, attempt);
  mix_word(h, lane);
  mix_word(h, epoch);
  return splitmix(h);
}

double sample_duration(double mean_seconds, double jitter_fraction, RandomStream& stream) {
  const double u = (2.0 * stream.uniform() - 1.0) * jitter_fraction;
  return mean_seconds * (1.0 + u);
}

std::optional<InjectedFault> inject(const FaultInjectorConfig& cfg, double duration, RandomStream& stream) {
  std::optional<FaultLevel> hit;
  for (FaultLevel level : kFaultLevels) {
    const double u = stream.uniform();
    if (!hit && u < cfg.at(level).probability_per_task) hit = level;
  }
  const double kind_draw = stream.uniform();
  const double offset_draw = stream.uniform();
  const double detect_draw = stream.uniform();
  if (!hit) return std::nullopt;

  const auto kinds = injectable_kinds(*hit);
  const auto index = std::min(kinds.size() - 1, static_cast<std::size_t>(kind_draw * static_cast<double>(kinds.size())));
  InjectedFault fault;
  fault.level = *hit;
  fault.kind = kinds[index];
  fault.offset = offset_draw * duration;
  fault.detected = detect_draw < cfg.at(*hit).detection_probability;
  return fault;
}

std::optional<InjectedFault> inject_transfer_fault(const FaultInjectorConfig& cfg, double duration,
                                                   RandomStream& stream) {
  const auto& level = cfg.at(FaultLevel::Workflow);
  const double hit = stream.uniform();
  const double offset_draw = stream.uniform();
  const double detect_draw = stream.uniform();
  if (!(hit < level.probability_per_task)) return std::nullopt;
  return InjectedFault{FaultLevel::Workflow, FaultKind::DataMovementFailed, offset_draw * duration,
                       detect_draw < level.detection_probability};
}

TransferOutcome transfer(const Grid& grid, std::string_view from, std::string_view to, std::uint64_t bytes,
                         double now, const FaultInjectorConfig& cfg, RandomStream& stream) {
  const auto t = grid.transfer_time(from, to, bytes);
  if (!t) {
    throw Error(ErrorCode::Unreachable, "no link from '" + std::string(from) + "' to '" + std::string(to) + "'");
  }
  TransferOutcome out;
  out.completes_at = now + *t;
  if (from != to) out.fault = inject_transfer_fault(cfg, *t, stream);
  return out;
}

SlotPool::SlotPool(const Grid& grid) {
  for (const auto& s : grid.sites()) sites_[s.site_id].capacity = s.slots;
}

bool SlotPool::acquire(const std::string& site, int unit) {
  auto& s = sites_.at(site);
  if (s.running < s.capacity && s.waiting.empty()) {
    ++s.running;
    return true;
  }
  s.waiting.push_back(unit);
  return false;
}

std::optional<int> SlotPool::release(const std::string& site) {
  auto& s = sites_.at(site);
  if (!s.waiting.empty()) {
    const int next = s.waiting.front();
    s.waiting.pop_front();
    return next;  // slot passes straight to the queued unit
  }
  if (s.running > 0) --s.running;
  return std::nullopt;
}

void SlotPool::withdraw(const std::string& site, int unit) {
  auto& q = sites_.at(site).waiting;
  q.erase(std::remove(q.begin(), q.end(), unit), q.end());
}

int SlotPool::running(const std::string& site) const { return sites_.at(site).running; }

int SlotPool::capacity(const std::string& site) const { return sites_.at(site).capacity; }

}  // namespace gridflow
