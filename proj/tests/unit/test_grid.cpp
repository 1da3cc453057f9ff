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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "generators.hpp"
#include "gridflow/grid.hpp"

namespace gridflow::testing {
namespace {

FaultInjectorConfig only(FaultLevel level, double p, std::optional<double> detect = std::nullopt) {
  FaultInjectorConfig cfg;
  cfg.at(level).probability_per_task = p;
  if (detect) cfg.at(level).detection_probability = *detect;
  return cfg;
}

RandomStream stream_for(std::uint64_t seed, std::uint64_t task) {
  return RandomStream(substream_seed(seed, "inst", "T", task));
}

TEST_CASE("load_grid") {
  const Grid one = load_grid(R"({"sites":[{"site_id":"s1","slots":2,"storage_capacity_bytes":100}],"links":[]})");
  CHECK(one.sites().size() == 1);
  CHECK(one.links().empty());
  CHECK(one.site("s1")->slots == 2);

  CHECK(error_code_of([] {
          load_grid(R"({"sites":[{"site_id":"s1","slots":1,"storage_capacity_bytes":1}],
                        "links":[{"from":"s1","to":"s9","bandwidth_bps":1,"latency_s":0}]})");
        }) == ErrorCode::DanglingLink);
  CHECK(error_code_of([] {
          load_grid(R"({"sites":[{"site_id":"a","slots":1,"storage_capacity_bytes":1},
                                 {"site_id":"b","slots":1,"storage_capacity_bytes":1}],
                        "links":[{"from":"a","to":"b","bandwidth_bps":0,"latency_s":0}]})");
        }) == ErrorCode::InvalidGrid);
  CHECK(error_code_of([] {
          load_grid(R"({"sites":[{"site_id":"a","slots":1,"storage_capacity_bytes":1},
                                 {"site_id":"a","slots":1,"storage_capacity_bytes":1}],"links":[]})");
        }) == ErrorCode::DuplicateSite);
  CHECK(error_code_of([] {
          load_grid(R"({"sites":[{"site_id":"a","slots":0,"storage_capacity_bytes":1}],"links":[]})");
        }) == ErrorCode::InvalidGrid);
  CHECK(load_grid(grid_to_json(one).dump()).sites() == one.sites());
}

TEST_CASE("fault config") {
  const auto cfg = load_fault_config(R"({"os":{"p_task":1.0},"user":{"p_task":0.5,"p_detect":0.9}})");
  CHECK(cfg.at(FaultLevel::OperatingSystem).probability_per_task == 1.0);
  CHECK(cfg.at(FaultLevel::OperatingSystem).detection_probability == doctest::Approx(0.37));
  CHECK(cfg.at(FaultLevel::User).detection_probability == doctest::Approx(0.9));
  CHECK(cfg.at(FaultLevel::Hardware).probability_per_task == 0.0);
  const FaultInjectorConfig defaults;
  CHECK(defaults.at(FaultLevel::Hardware).detection_probability == 1.0);
  CHECK(defaults.at(FaultLevel::Middleware).detection_probability == doctest::Approx(0.628));
  CHECK(defaults.at(FaultLevel::Task).detection_probability == doctest::Approx(0.30));
  CHECK(defaults.at(FaultLevel::Workflow).detection_probability == doctest::Approx(0.625));
  CHECK(defaults.at(FaultLevel::User).detection_probability == doctest::Approx(0.25));
  CHECK(error_code_of([] { load_fault_config(R"({"kernel":{"p_task":1}})"); }) == ErrorCode::InvalidConfig);
  CHECK(error_code_of([] { load_fault_config(R"({"os":{"p_task":1.5}})"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("transfer") {
  const Grid g({Site{"a", 1, kMB}, Site{"b", 1, kMB}, Site{"c", 1, kMB}}, {Link{"a", "b", 1e7, 0.1}});
  const FaultInjectorConfig none = only(FaultLevel::Workflow, 0.0);
  RandomStream s(1);
  CHECK(transfer(g, "a", "b", 100000000, 50.0, none, s).completes_at == doctest::Approx(60.1));
  CHECK(transfer(g, "b", "a", 100000000, 0.0, none, s).completes_at == doctest::Approx(10.1));
  const auto local = transfer(g, "a", "a", 100000000, 7.0, only(FaultLevel::Workflow, 1.0), s);
  CHECK(local.completes_at == 7.0);
  CHECK_FALSE(local.fault);
  const auto failed = transfer(g, "a", "b", 100000000, 0.0, only(FaultLevel::Workflow, 1.0), s);
  REQUIRE(failed.fault);
  CHECK(failed.fault->kind == FaultKind::DataMovementFailed);
  CHECK(failed.fault->level == FaultLevel::Workflow);
  CHECK(error_code_of([&] { transfer(g, "a", "c", 1, 0.0, none, s); }) == ErrorCode::Unreachable);
}

TEST_CASE("durations") {
  RandomStream s(3);
  CHECK(sample_duration(5.0, 0.0, s) == 5.0);
  for (int i = 0; i < 1000; ++i) {
    const double d = sample_duration(10.0, 0.2, s);
    CHECK(d >= 8.0);
    CHECK(d <= 12.0);
  }
  RandomStream a(substream_seed(9, "i", "T1", 1));
  RandomStream b(substream_seed(9, "i", "T1", 1));
  CHECK(sample_duration(10.0, 0.2, a) == sample_duration(10.0, 0.2, b));
}

TEST_CASE("substream seeds depend only on their arguments") {
  const auto base = substream_seed(1, "i", "T1", 1);
  CHECK(substream_seed(1, "i", "T1", 1) == base);
  std::set<std::uint64_t> distinct{base,
                                   substream_seed(2, "i", "T1", 1),
                                   substream_seed(1, "j", "T1", 1),
                                   substream_seed(1, "i", "T2", 1),
                                   substream_seed(1, "i", "T1", 2),
                                   substream_seed(1, "i", "T1", 1, 1),
                                   substream_seed(1, "i", "T1", 1, 0, 1)};
  CHECK(distinct.size() == 7);
}

TEST_CASE("inject") {
  SUBCASE("all probabilities zero never fire") {
    FaultInjectorConfig cfg;
    for (auto level : kFaultLevels) cfg.at(level).probability_per_task = 0.0;
    for (std::uint64_t t = 0; t < 2000; ++t) {
      auto s = stream_for(1, t);
      CHECK_FALSE(inject(cfg, 10.0, s));
    }
  }
  SUBCASE("hardware faults are always detected") {
    const auto cfg = only(FaultLevel::Hardware, 1.0);
    for (std::uint64_t t = 0; t < 1000; ++t) {
      auto s = stream_for(2, t);
      const auto f = inject(cfg, 10.0, s);
      REQUIRE(f);
      CHECK(f->level == FaultLevel::Hardware);
      CHECK(f->detected);
      CHECK(f->offset >= 0.0);
      CHECK(f->offset < 10.0);
    }
  }
  SUBCASE("os detection follows the configured rate") {
    // 1000 tasks per seed; the sweep mean must land in [340, 400] and each
    // seed within 4 sigma of 370.
    const auto cfg = only(FaultLevel::OperatingSystem, 1.0);
    const double sigma = std::sqrt(1000 * 0.37 * 0.63);
    int total = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      int detected = 0;
      for (std::uint64_t t = 0; t < 1000; ++t) {
        auto s = stream_for(seed, t);
        const auto f = inject(cfg, 10.0, s);
        REQUIRE(f);
        CHECK(f->level == FaultLevel::OperatingSystem);
        detected += f->detected;
      }
      CHECK(std::abs(detected - 370.0) <= 4 * sigma);
      total += detected;
    }
    CHECK(total / 20.0 >= 340.0);
    CHECK(total / 20.0 <= 400.0);
  }
  SUBCASE("earlier levels win") {
    FaultInjectorConfig cfg;
    cfg.at(FaultLevel::Middleware).probability_per_task = 1.0;
    cfg.at(FaultLevel::Task).probability_per_task = 1.0;
    auto s = stream_for(5, 0);
    CHECK(inject(cfg, 1.0, s)->level == FaultLevel::Middleware);
  }
  SUBCASE("kinds are drawn from the level") {
    const auto cfg = only(FaultLevel::Task, 1.0);
    std::set<FaultKind> seen;
    for (std::uint64_t t = 0; t < 500; ++t) {
      auto s = stream_for(6, t);
      const auto f = inject(cfg, 1.0, s);
      CHECK(level_of(f->kind) == FaultLevel::Task);
      seen.insert(f->kind);
    }
    CHECK(seen.size() == injectable_kinds(FaultLevel::Task).size());
  }
  SUBCASE("draw count does not depend on the config") {
    const auto a = only(FaultLevel::User, 1.0);
    const FaultInjectorConfig b = only(FaultLevel::User, 0.0);
    auto s1 = stream_for(8, 0);
    auto s2 = stream_for(8, 0);
    inject(a, 3.0, s1);
    inject(b, 3.0, s2);
    CHECK(s1.uniform() == s2.uniform());
  }
}

TEST_CASE("property: fault counts stay within 4 sigma of np") {
  const double p = 0.3;
  const int n = 1000;
  const double sigma = std::sqrt(n * p * (1 - p));
  int outside = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto cfg = only(FaultLevel::Task, p);
    int hits = 0;
    for (int t = 0; t < n; ++t) {
      auto s = stream_for(seed, static_cast<std::uint64_t>(t));
      hits += inject(cfg, 1.0, s).has_value();
    }
    outside += std::abs(hits - n * p) > 4 * sigma;
  }
  CHECK(outside == 0);
}

TEST_CASE("event queue") {
  EventQueue<int> q;
  q.push(5.0, 1);
  q.push(3.0, 2);
  q.push(5.0, 3);
  q.push(3.0, 4);
  std::vector<int> order;
  std::vector<double> times;
  while (!q.empty()) {
    auto e = q.pop();
    order.push_back(e.payload);
    times.push_back(q.now());
  }
  CHECK(order == std::vector<int>{2, 4, 1, 3});
  CHECK(times == std::vector<double>{3, 3, 5, 5});
  q.push(1.0, 9);
  CHECK(q.top().at == 5.0);
  CHECK(q.pop().payload == 9);
  CHECK(q.now() == 5.0);
}

TEST_CASE("slot pool") {
  const Grid g({Site{"s", 2, kMB}}, {});
  SlotPool pool(g);
  CHECK(pool.capacity("s") == 2);
  CHECK(pool.acquire("s", 1));
  CHECK(pool.acquire("s", 2));
  CHECK_FALSE(pool.acquire("s", 3));
  CHECK_FALSE(pool.acquire("s", 4));
  CHECK_FALSE(pool.acquire("s", 5));
  CHECK(pool.running("s") == 2);
  pool.withdraw("s", 4);
  CHECK(pool.release("s") == std::optional<int>(3));
  CHECK(pool.running("s") == 2);
  CHECK(pool.release("s") == std::optional<int>(5));
  CHECK(pool.release("s") == std::nullopt);
  CHECK(pool.running("s") == 1);
}

}  // namespace
}  // namespace gridflow::testing
