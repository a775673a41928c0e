#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gridagent/actions.h"
#include "gridagent/metrics.h"
#include "gridagent/model.h"
#include "gridagent/planner.h"
#include "gridagent/powerflow.h"
#include "gridagent/representation.h"
#include "gridagent/violations.h"

namespace gridagent {

enum class RunStatus { Running, Resolved, Exhausted, Failed };
// planner_error: the planner threw; the run stops there.
enum class AttemptOutcome { Accepted, RolledBack, Aborted, PlannerError };

std::string_view to_string(RunStatus s);
std::string_view to_string(AttemptOutcome o);

inline constexpr int kDefaultTMax = 10;
inline constexpr std::size_t kDefaultTokenBudget = 4000;

struct WorkflowOptions {
  int t_max = kDefaultTMax;
  SolveOptions solve;
  std::size_t token_budget = kDefaultTokenBudget;
  int focus_hops = kDefaultFocusHops;
  ActionConfig actions;
};

struct Effectiveness {
  int resolved_count = 0;
  int introduced_count = 0;
  int actions_used = 0;
  std::map<std::string, int> by_type;  // action_type() -> count

  bool operator==(const Effectiveness&) const = default;
};

/// What a plan did to the report. A rejected plan resolves nothing.
Effectiveness evaluate_effectiveness(const ViolationReport& before, const ViolationReport& after, const Plan& plan,
                                     bool accepted = true);

struct TaggedAction {
  int iteration = 0;
  Action action;
  bool operator==(const TaggedAction&) const = default;
};

struct Attempt {
  int iteration = 0;
  Plan plan;
  AttemptOutcome outcome = AttemptOutcome::RolledBack;
  std::size_t executed = 0;  // actions applied before validation (early break or abort)
  ViolationReport before;
  ViolationReport after;  // == before when nothing could be evaluated
  ContextMode context_mode = ContextMode::FullDetail;
  std::size_t context_tokens = 0;
  std::string detail;  // abort / planner error reason
  Effectiveness effectiveness;
  // For each executed action: violations that disappeared right after it.
  std::vector<std::vector<std::string>> resolved_by_action;
};

struct WorkflowState {
  int iteration = 0;
  Network sandbox;
  std::string baseline_snapshot;
  ViolationReport initial_report;
  ViolationReport current_report;
  std::vector<TaggedAction> accepted_actions;
  std::vector<Attempt> attempt_log;
  std::vector<std::string> knowledge;  // failed-plan summaries fed back as history
  RunStatus status = RunStatus::Running;
  std::string failure;  // set when the run could not start
};

struct ResolutionResult {
  RunStatus status = RunStatus::Running;
  Network network;
  std::vector<TaggedAction> accepted_actions;
  int iterations = 0;
  double wall_time_seconds = 0.0;
  std::string explanation;
  ViolationReport initial_report;
  ViolationReport final_report;
  std::vector<Attempt> attempts;
  RunMetrics metrics;
  std::string planner_id;
};

/// The plan / execute / validate loop on a private copy of `net`. Never
/// throws for planner or solver trouble: it ends up in status and attempts.
ResolutionResult run(const Network& net, Planner& planner, const WorkflowOptions& opts = {});

/// Deterministic narrative of a finished run.
std::string summarize(const WorkflowState& state);

/// Stable-order JSON. Timing is left out when include_timing is false.
nlohmann::json to_json(const ResolutionResult& r, bool include_timing = true);

nlohmann::json action_to_json(const Action& a);
Action action_from_json(const nlohmann::json& j);

}  // namespace gridagent
