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

// Deterministic simulated grid: sites, links, slots, virtual clock and the
// seeded fault injector.

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gridflow/fault.hpp"

namespace gridflow {

struct Site {
  std::string site_id;
  int slots = 1;
  std::uint64_t storage_capacity_bytes = 0;
  bool operator==(const Site&) const = default;
};

struct Link {
  std::string from_site;
  std::string to_site;
  double bandwidth_bytes_per_s = 1.0;
  double latency_s = 0.0;
  bool operator==(const Link&) const = default;
};

class Grid {
 public:
  Grid() = default;
  // Throws DuplicateSite, DanglingLink or InvalidGrid.
  Grid(std::vector<Site> sites, std::vector<Link> links);

  const std::vector<Site>& sites() const noexcept { return sites_; }
  const std::vector<Link>& links() const noexcept { return links_; }
  const Site* site(std::string_view id) const;
  bool has_site(std::string_view id) const { return site(id) != nullptr; }

  // Directed lookup; a link listed only in the other direction is symmetric.
  const Link* link(std::string_view from, std::string_view to) const;

  // latency + bytes / bandwidth; zero on the same site. nullopt when unlinked.
  std::optional<double> transfer_time(std::string_view from, std::string_view to, std::uint64_t bytes) const;

 private:
  std::vector<Site> sites_;
  std::vector<Link> links_;
};

// {"sites":[{"site_id","slots","storage_capacity_bytes"}],
//  "links":[{"from","to","bandwidth_bps","latency_s"}]}
Grid load_grid(std::string_view config_text);
nlohmann::ordered_json grid_to_json(const Grid& grid);

struct LevelInjection {
  double probability_per_task = 0.0;
  double detection_probability = 1.0;
  bool operator==(const LevelInjection&) const = default;
};

// Default detection probabilities per level, in kFaultLevels order.
inline constexpr std::array<double, 6> kDefaultDetection = {1.0, 0.37, 0.628, 0.30, 0.625, 0.25};

struct FaultInjectorConfig {
  std::array<LevelInjection, 6> levels;

  FaultInjectorConfig();

  LevelInjection& at(FaultLevel level) { return levels[static_cast<std::size_t>(level)]; }
  const LevelInjection& at(FaultLevel level) const { return levels[static_cast<std::size_t>(level)]; }
  bool operator==(const FaultInjectorConfig&) const = default;
};

// JSON map level name -> {"p_task","p_detect"}; omitted entries keep defaults.
FaultInjectorConfig load_fault_config(std::string_view text);

// ---------------------------------------------------------------------------
// Seeded randomness

// Mixes the components into a substream seed. Depends only on its arguments,
// never on event interleaving.
std::uint64_t substream_seed(std::uint64_t run_seed, std::string_view instance_id, std::string_view activity_id,
                             std::uint64_t attempt, std::uint64_t lane = 0, std::uint64_t epoch = 0);

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

// mean * (1 + u), u uniform in [-jitter, +jitter].
double sample_duration(double mean_seconds, double jitter_fraction, RandomStream& stream);

struct InjectedFault {
  FaultLevel level = FaultLevel::Hardware;
  FaultKind kind = FaultKind::MachineCrash;
  double offset = 0.0;  // seconds after the start of the attempt
  bool detected = true;
};

// At most one fault per attempt; levels are sampled Hardware -> User and the
// first hit wins. Always consumes the same number of draws for a given config.
std::optional<InjectedFault> inject(const FaultInjectorConfig& cfg, double duration, RandomStream& stream);

// Transfers only fail at the workflow level, as DataMovementFailed.
std::optional<InjectedFault> inject_transfer_fault(const FaultInjectorConfig& cfg, double duration,
                                                   RandomStream& stream);

struct TransferOutcome {
  double completes_at = 0.0;
  std::optional<InjectedFault> fault;
};

// Throws Unreachable when no link joins the sites.
TransferOutcome transfer(const Grid& grid, std::string_view from, std::string_view to, std::uint64_t bytes,
                         double now, const FaultInjectorConfig& cfg, RandomStream& stream);

// ---------------------------------------------------------------------------
// Virtual clock

// Min-heap over (time, insertion sequence). `now` never decreases.
template <class Payload>
class EventQueue {
 public:
  struct Entry {
    double at;
    std::uint64_t seq;
    Payload payload;
  };

  // Times earlier than now are clamped to now.
  void push(double at, Payload payload) {
    heap_.push(Entry{std::max(at, now_), next_seq_++, std::move(payload)});
  }

  bool empty() const noexcept { return heap_.empty(); }
  std::size_t size() const noexcept { return heap_.size(); }
  double now() const noexcept { return now_; }
  void advance_to(double t) { now_ = std::max(now_, t); }
  const Entry& top() const { return heap_.top(); }
  // Drops the earliest entry without advancing the clock.
  void discard() { heap_.pop(); }

  Entry pop() {
    Entry e = heap_.top();
    heap_.pop();
    now_ = std::max(now_, e.at);
    return e;
  }

  void clear() { heap_ = {}; }

 private:
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
};

// Per-site execution slots with FIFO waiting queues.
class SlotPool {
 public:
  explicit SlotPool(const Grid& grid);

  // True when a slot was granted immediately, false when `unit` was queued.
  bool acquire(const std::string& site, int unit);
  // Frees a slot; returns the queued unit that takes it over, if any.
  std::optional<int> release(const std::string& site);
  // Drops `unit` from the waiting queue of `site`.
  void withdraw(const std::string& site, int unit);

  int running(const std::string& site) const;
  int capacity(const std::string& site) const;

 private:
  struct SiteSlots {
    int capacity = 1;
    int running = 0;
    std::deque<int> waiting;
  };
  std::map<std::string, SiteSlots> sites_;
};

}  // namespace gridflow
