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

#include "common/json_util.hpp"
#include "gridflow/fault.hpp"

namespace gridflow {

using detail::json;

std::string_view mode_name(CheckpointMode mode) { return mode == CheckpointMode::Light ? "light" : "heavy"; }

std::optional<CheckpointMode> parse_mode(std::string_view name) {
  if (name == "light") return CheckpointMode::Light;
  if (name == "heavy") return CheckpointMode::Heavy;
  return std::nullopt;
}

nlohmann::ordered_json policy_to_json(const Policy& policy) {
  nlohmann::ordered_json j;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, RetryPolicy>) {
          j["policy"] = "retry";
          j["max"] = p.max_attempts;
          j["backoff_s"] = p.backoff_seconds;
          j["same_service"] = p.same_service;
        } else if constexpr (std::is_same_v<T, RebindPolicy>) {
          j["policy"] = "rebind";
          j["max_alternatives"] = p.max_alternatives;
        } else if constexpr (std::is_same_v<T, ReplicatePolicy>) {
          j["policy"] = "replicate";
          j["k"] = p.k;
        } else if constexpr (std::is_same_v<T, CheckpointPolicy>) {
          j["policy"] = "checkpoint";
          j["mode"] = mode_name(p.mode);
          j["every_n"] = p.every_n_completions;
        } else if constexpr (std::is_same_v<T, SavePartialPolicy>) {
          j["policy"] = "save_partial";
        } else if constexpr (std::is_same_v<T, CompensatePolicy>) {
          j["policy"] = "compensate";
        } else if constexpr (std::is_same_v<T, AlertPolicy>) {
          j["policy"] = "alert";
          j["window_s"] = p.window_seconds;
          j["threshold"] = p.fault_threshold;
          if (p.action.kind == AlertAction::Kind::EmitAlertEvent) {
            j["action"] = "emit";
          } else {
            j["action"] = "hook";
            j["hook"] = p.action.hook;
          }
        }
      },
      policy);
  return j;
}

namespace {

int positive_int(const json& obj, std::string_view key, std::string_view ctx, int minimum = 1) {
  const auto value = detail::get_int(obj, key, ctx);
  if (value < minimum) {
    detail::shape_error(detail::join_path(ctx, key), "must be >= " + std::to_string(minimum));
  }
  return static_cast<int>(value);
}

}  // namespace

Policy policy_from_json(const json& j) {
  constexpr std::string_view ctx = "policy";
  const auto name = detail::get_string(j, "policy", ctx);
  if (name == "retry") {
    RetryPolicy p;
    p.max_attempts = positive_int(j, "max", ctx);
    if (const auto* b = detail::optional_field(j, "backoff_s")) {
      p.backoff_seconds = detail::as_number(*b, "policy.backoff_s");
      if (p.backoff_seconds < 0) detail::shape_error("policy.backoff_s", "must be non-negative");
    }
    if (const auto* s = detail::optional_field(j, "same_service")) p.same_service = detail::as_bool(*s, ctx);
    return p;
  }
  if (name == "rebind") return RebindPolicy{positive_int(j, "max_alternatives", ctx)};
  if (name == "replicate") return ReplicatePolicy{positive_int(j, "k", ctx, 2)};
  if (name == "checkpoint") {
    CheckpointPolicy p;
    const auto mode = detail::get_string(j, "mode", ctx);
    const auto parsed = parse_mode(mode);
    if (!parsed) detail::shape_error("policy.mode", "unknown checkpoint mode '" + mode + "'");
    p.mode = *parsed;
    p.every_n_completions = positive_int(j, "every_n", ctx);
    return p;
  }
  if (name == "save_partial") return SavePartialPolicy{};
  if (name == "compensate") return CompensatePolicy{};
  if (name == "alert") {
    AlertPolicy p;
    p.window_seconds = detail::get_number(j, "window_s", ctx);
    if (p.window_seconds <= 0) detail::shape_error("policy.window_s", "must be positive");
    p.fault_threshold = positive_int(j, "threshold", ctx);
    const auto action = detail::get_string(j, "action", ctx);
    if (action == "emit") {
      p.action.kind = AlertAction::Kind::EmitAlertEvent;
    } else if (action == "hook") {
      p.action.kind = AlertAction::Kind::RunHook;
      p.action.hook = detail::get_string(j, "hook", ctx);
    } else {
      detail::shape_error("policy.action", "unknown alert action '" + action + "'");
    }
    return p;
  }
  detail::shape_error("policy.policy", "unknown policy '" + name + "'");
}

std::string_view outcome_name(Resolution::Outcome outcome) {
  switch (outcome) {
    case Resolution::Outcome::Retry: return "retry";
    case Resolution::Outcome::Rebind: return "rebind";
    case Resolution::Outcome::Restore: return "restore";
    case Resolution::Outcome::Compensate: return "compensate";
    case Resolution::Outcome::Escalate: return "escalate";
  }
  return "escalate";
}

Resolution handle(const FaultEvent& fault, std::span<const Policy> own, std::span<const Policy> inherited,
                  const HandleContext& context) {
  Resolution r;
  if (!fault.detected) return r;

  // Returns true once a policy has taken ownership of the fault.
  auto apply = [&](const Policy& policy) -> bool {
    return std::visit(
        [&](const auto& p) -> bool {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, RetryPolicy>) {
            if (context.is_invoke && context.attempt_count < p.max_attempts) {
              r.outcome = Resolution::Outcome::Retry;
              r.delay_seconds = p.backoff_seconds;
              r.same_service = p.same_service;
              return true;
            }
            r.exhausted.emplace_back("RetryExhausted");
          } else if constexpr (std::is_same_v<T, RebindPolicy>) {
            if (context.is_invoke && context.rebinds_used < p.max_alternatives && context.has_unused_candidate) {
              r.outcome = Resolution::Outcome::Rebind;
              r.same_service = false;
              return true;
            }
            r.exhausted.emplace_back("NoAlternativeService");
          } else if constexpr (std::is_same_v<T, CheckpointPolicy>) {
            if (context.checkpoint_restorable) {
              r.outcome = Resolution::Outcome::Restore;
              return true;
            }
            r.exhausted.emplace_back("NoCheckpoint");
          } else if constexpr (std::is_same_v<T, SavePartialPolicy>) {
            if (context.is_invoke && context.has_outputs) r.save_partial = true;
          } else if constexpr (std::is_same_v<T, CompensatePolicy>) {
            r.outcome = Resolution::Outcome::Compensate;
            return true;
          }
          // Replicate acts at dispatch, Alert through the action monitor.
          return false;
        },
        policy);
  };

  for (const auto& p : own) {
    if (apply(p)) return r;
  }
  for (const auto& p : inherited) {
    if (apply(p)) return r;
  }
  r.outcome = Resolution::Outcome::Escalate;
  return r;
}

ActionMonitor::ActionMonitor(std::vector<AlertPolicy> rules)
    : rules_(std::move(rules)), consumed_(rules_.size(), 0) {}

std::vector<FiredAction> ActionMonitor::on_fault(double at) {
  history_.push_back(at);
  std::vector<FiredAction> fired;
  for (std::size_t r = 0; r < rules_.size(); ++r) {
    const auto& rule = rules_[r];
    int count = 0;
    for (std::size_t i = consumed_[r]; i < history_.size(); ++i) {
      if (history_[i] >= at - rule.window_seconds && history_[i] <= at) ++count;
    }
    if (count >= rule.fault_threshold) {
      fired.push_back(FiredAction{r, at, count, rule.action});
      consumed_[r] = history_.size();
    }
  }
  return fired;
}

std::vector<FiredAction> evaluate_actions(std::span<const double> detected_fault_times,
                                          std::span<const AlertPolicy> rules) {
  ActionMonitor monitor({rules.begin(), rules.end()});
  std::vector<FiredAction> out;
  for (double t : detected_fault_times) {
    auto fired = monitor.on_fault(t);
    out.insert(out.end(), fired.begin(), fired.end());
  }
  return out;
}

}  // namespace gridflow
