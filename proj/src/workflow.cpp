#include "gridagent/workflow.h"

#include <chrono>
#include <set>

#include <fmt/format.h>

#include "gridagent/case_io.h"
#include "gridagent/error.h"

namespace gridagent {

using nlohmann::json;

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Running: return "running";
    case RunStatus::Resolved: return "resolved";
    case RunStatus::Exhausted: return "exhausted";
    case RunStatus::Failed: return "failed";
  }
  return "running";
}

std::string_view to_string(AttemptOutcome o) {
  switch (o) {
    case AttemptOutcome::Accepted: return "accepted";
    case AttemptOutcome::RolledBack: return "rolled_back";
    case AttemptOutcome::Aborted: return "aborted";
    case AttemptOutcome::PlannerError: return "planner_error";
  }
  return "aborted";
}

Effectiveness evaluate_effectiveness(const ViolationReport& before, const ViolationReport& after, const Plan& plan,
                                     bool accepted) {
  Effectiveness e;
  const Comparison c = compare(before, after);
  e.resolved_count = accepted ? static_cast<int>(c.resolved.size()) : 0;
  e.introduced_count = static_cast<int>(c.introduced.size());
  e.actions_used = static_cast<int>(plan.actions.size());
  for (const auto& a : plan.actions) ++e.by_type[std::string(action_type(a))];
  return e;
}

namespace {

std::string element_key(const Violation& v) { return fmt::format("{} {}", to_string(v.kind), v.element); }

std::vector<std::string> resolved_keys(const ViolationReport& before, const ViolationReport& after) {
  std::vector<std::string> out;
  for (const auto& v : compare(before, after).resolved) out.push_back(element_key(v));
  return out;
}

std::string plan_summary(const Plan& plan) {
  std::vector<std::string> parts;
  for (const auto& a : plan.actions) parts.push_back(describe(a));
  return parts.empty() ? "(no actions)" : fmt::format("{}", fmt::join(parts, "; "));
}

std::string knowledge_line(const Attempt& a) {
  switch (a.outcome) {
    case AttemptOutcome::RolledBack:
      return fmt::format("iteration {}: [{}] did not improve ({} -> {} violations, severity {:.4f} -> {:.4f}); "
                         "rolled back",
                         a.iteration, plan_summary(a.plan), a.before.size(), a.after.size(), a.before.total_severity,
                         a.after.total_severity);
    case AttemptOutcome::Aborted:
      return fmt::format("iteration {}: [{}] aborted: {}", a.iteration, plan_summary(a.plan), a.detail);
    default:
      return {};
  }
}

// Puts the sandbox back to the snapshot, rebuilding it if undo drifted.
void restore(Network& sandbox, const std::vector<UndoRecord>& stack, const std::string& snapshot) {
  undo_plan(sandbox, stack);
  if (serialize_network(sandbox) != snapshot) sandbox = network_from_case(parse_case_json(snapshot));
}

struct Trial {
  std::optional<ViolationReport> report;
  std::string error;
};

Trial trial_solve(const Network& net, const SolveOptions& opts) {
  try {
    const PowerFlowSolution sol = solve(net, opts);
    if (!sol.converged) return {std::nullopt, fmt::format("power flow diverged after {} iterations", sol.iterations)};
    return {analyze(net, sol), {}};
  } catch (const Error& e) {
    return {std::nullopt, e.what()};
  }
}

void execute_attempt(WorkflowState& st, Attempt& at, const WorkflowOptions& opts) {
  std::vector<UndoRecord> stack;  // most recent first
  ViolationReport running = st.current_report;
  for (const auto& action : at.plan.actions) {
    if (auto d = validate_action(st.sandbox, action)) {
      at.outcome = AttemptOutcome::Aborted;
      at.detail = fmt::format("action {} ({}) rejected: {}: {}", at.executed, describe(action), to_string(d->code),
                              d->message);
      break;
    }
    stack.insert(stack.begin(), apply_action(st.sandbox, action));
    ++at.executed;
    Trial t = trial_solve(st.sandbox, opts.solve);
    if (!t.report) {
      at.outcome = AttemptOutcome::Aborted;
      at.detail = fmt::format("after action {} ({}): {}", at.executed - 1, describe(action), t.error);
      break;
    }
    at.resolved_by_action.push_back(resolved_keys(running, *t.report));
    running = std::move(*t.report);
    if (running.empty()) break;  // resolved mid-plan; the rest is not needed
  }

  if (at.outcome == AttemptOutcome::Aborted) {
    at.after = st.current_report;
    at.resolved_by_action.clear();
    restore(st.sandbox, stack, st.baseline_snapshot);
    at.effectiveness = evaluate_effectiveness(at.before, at.after, at.plan, false);
    return;
  }

  at.after = running;
  if (at.executed < at.plan.actions.size()) at.plan.actions.resize(at.executed);
  if (improves(at.before, at.after)) {
    at.outcome = AttemptOutcome::Accepted;
    for (const auto& a : at.plan.actions) st.accepted_actions.push_back({at.iteration, a});
    st.current_report = at.after;
    st.baseline_snapshot = serialize_network(st.sandbox);
    at.effectiveness = evaluate_effectiveness(at.before, at.after, at.plan, true);
  } else {
    at.outcome = AttemptOutcome::RolledBack;
    at.resolved_by_action.clear();
    restore(st.sandbox, stack, st.baseline_snapshot);
    at.effectiveness = evaluate_effectiveness(at.before, at.after, at.plan, false);
  }
}

}  // namespace

ResolutionResult run(const Network& net, Planner& planner, const WorkflowOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  WorkflowState st;
  st.sandbox = net;
  st.baseline_snapshot = serialize_network(st.sandbox);

  // Topology: seed the violation state.
  bool started = false;
  std::optional<PowerFlowSolution> sol;
  try {
    sol = solve(st.sandbox, opts.solve);
    if (sol->converged) {
      st.initial_report = analyze(st.sandbox, *sol);
      started = true;
    } else {
      st.failure = "initial power flow did not converge";
    }
  } catch (const Error& e) {
    st.failure = e.what();
  }
  st.current_report = st.initial_report;

  if (!started) {
    st.status = RunStatus::Failed;
  } else if (st.current_report.empty()) {
    st.status = RunStatus::Resolved;
  }

  bool planner_failed = false;
  for (int t = 1; st.status == RunStatus::Running && t <= std::max(opts.t_max, 0); ++t) {
    st.iteration = t;
    Attempt at;
    at.iteration = t;
    at.before = st.current_report;

    PlanRequest req;
    req.context = render_context(st.sandbox, *sol, st.current_report, opts.token_budget, opts.focus_hops);
    req.available_actions = describe_capabilities(st.sandbox, opts.actions);
    req.t_max_remaining = opts.t_max - t + 1;
    req.history = st.knowledge;
    req.network = &st.sandbox;
    req.report = st.current_report;
    req.focus_hops = opts.focus_hops;
    at.context_mode = req.context.mode;
    at.context_tokens = req.context.token_estimate;

    try {
      at.plan = planner.plan(req);
    } catch (const std::exception& e) {
      at.outcome = AttemptOutcome::PlannerError;
      at.detail = e.what();
      at.after = at.before;
      at.effectiveness = evaluate_effectiveness(at.before, at.after, at.plan, false);
      st.attempt_log.push_back(std::move(at));
      planner_failed = true;
      break;
    }
    if (at.plan.planner_id.empty()) at.plan.planner_id = planner.id();

    if (at.plan.actions.empty()) {
      at.outcome = AttemptOutcome::Aborted;
      at.detail = "planner returned an empty plan";
      at.after = at.before;
      at.effectiveness = evaluate_effectiveness(at.before, at.after, at.plan, false);
    } else {
      execute_attempt(st, at, opts);
    }
    if (at.outcome != AttemptOutcome::Accepted) st.knowledge.push_back(knowledge_line(at));
    st.attempt_log.push_back(std::move(at));

    if (st.current_report.empty()) {
      st.status = RunStatus::Resolved;
      break;
    }
    // Next iteration renders from the current sandbox.
    try {
      sol = solve(st.sandbox, opts.solve);
    } catch (const Error& e) {
      st.failure = e.what();  // cannot happen for a state that already solved
      break;
    }
  }

  if (st.status == RunStatus::Running) {
    if (planner_failed && st.accepted_actions.empty()) {
      st.status = RunStatus::Failed;
    } else {
      st.status = RunStatus::Exhausted;
    }
  }

  ResolutionResult r;
  r.status = st.status;
  r.accepted_actions = st.accepted_actions;
  r.iterations = static_cast<int>(st.attempt_log.size());
  r.initial_report = st.initial_report;
  r.final_report = st.current_report;
  r.attempts = st.attempt_log;
  r.planner_id = planner.id();
  r.explanation = summarize(st);
  r.network = std::move(st.sandbox);
  r.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.metrics = compute_metrics(r, r.initial_report, net);
  return r;
}

// ------------------------------------------------------------ summarizer ---

std::string summarize(const WorkflowState& st) {
  std::string out;
  if (!st.failure.empty() && st.attempt_log.empty() && st.initial_report.empty()) {
    return fmt::format("The run could not start: {}.\n", st.failure);
  }
  if (st.initial_report.empty()) {
    return "No violations were detected in the initial state; no action required.\n";
  }

  const auto& c = st.initial_report.counts;
  out += fmt::format(
      "Initial state: {} violation(s) ({} undervoltage, {} overvoltage, {} thermal, {} disconnected), total "
      "severity {:.4f}.\n",
      st.initial_report.size(), c.undervoltage, c.overvoltage, c.thermal, c.disconnected,
      st.initial_report.total_severity);
  for (const auto& v : st.initial_report.violations) out += "  - " + element_key(v) + "\n";

  for (const auto& a : st.attempt_log) {
    out += fmt::format("\nIteration {}", a.iteration);
    if (!a.plan.planner_id.empty()) out += fmt::format(" ({})", a.plan.planner_id);
    out += ": ";
    switch (a.outcome) {
      case AttemptOutcome::PlannerError:
        out += fmt::format("the planner produced no plan: {}\n", a.detail);
        continue;
      case AttemptOutcome::Accepted: out += "plan accepted.\n"; break;
      case AttemptOutcome::RolledBack: out += "plan rolled back (no improvement).\n"; break;
      case AttemptOutcome::Aborted: out += fmt::format("plan aborted: {}.\n", a.detail); break;
    }
    if (!a.plan.rationale.empty()) out += "  Rationale: " + a.plan.rationale + "\n";
    out += "  Actions: " + plan_summary(a.plan) + "\n";
    out += fmt::format("  Violations {} -> {}, severity {:.4f} -> {:.4f}.\n", a.before.size(), a.after.size(),
                       a.before.total_severity, a.after.total_severity);
    if (a.outcome == AttemptOutcome::Accepted) {
      for (std::size_t k = 0; k < a.resolved_by_action.size(); ++k) {
        const auto& fixed = a.resolved_by_action[k];
        out += fmt::format("  * {} -> {}\n", describe(a.plan.actions[k]),
                           fixed.empty() ? std::string("no violation cleared on its own")
                                         : fmt::format("cleared {}", fmt::join(fixed, ", ")));
      }
    }
  }

  out += fmt::format("\nFinal state ({}): {} violation(s), total severity {:.4f}", to_string(st.status),
                     st.current_report.size(), st.current_report.total_severity);
  out += fmt::format(", {} accepted action(s).\n", st.accepted_actions.size());
  for (const auto& v : st.current_report.violations) out += "  - remaining: " + element_key(v) + "\n";
  return out;
}

// ------------------------------------------------------------------ JSON ---

json action_to_json(const Action& a) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, SetSwitch>) {
          return {{"type", "set_switch"}, {"switch_id", x.switch_id}, {"closed", x.closed}};
        } else if constexpr (std::is_same_v<T, CurtailLoad>) {
          return {{"type", "curtail_load"}, {"load_id", x.load_id}, {"gamma", x.gamma}};
        } else if constexpr (std::is_same_v<T, AddBattery>) {
          return {{"type", "add_battery"},
                  {"bus_id", x.bus_id},
                  {"s_max_mva", x.s_max_mva},
                  {"p_max_mw", x.p_max_mw},
                  {"q_max_mvar", x.q_max_mvar}};
        } else {
          return {{"type", "dispatch_battery"}, {"battery_id", x.battery_id}, {"p_mw", x.p_mw}, {"q_mvar", x.q_mvar}};
        }
      },
      a);
}

Action action_from_json(const json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "set_switch") return SetSwitch{j.at("switch_id").get<std::string>(), j.at("closed").get<bool>()};
    if (type == "curtail_load") return CurtailLoad{j.at("load_id").get<std::string>(), j.at("gamma").get<double>()};
    if (type == "add_battery") {
      return AddBattery{j.at("bus_id").get<std::string>(), j.at("s_max_mva").get<double>(),
                        j.at("p_max_mw").get<double>(), j.at("q_max_mvar").get<double>()};
    }
    if (type == "dispatch_battery") {
      return DispatchBattery{j.at("battery_id").get<std::string>(), j.at("p_mw").get<double>(),
                             j.at("q_mvar").get<double>()};
    }
    throw Error(ErrorCode::SchemaError, "unknown action type '" + type + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed action: ") + e.what());
  }
}

namespace {

json effectiveness_json(const Effectiveness& e) {
  return {{"resolved_count", e.resolved_count},
          {"introduced_count", e.introduced_count},
          {"actions_used", e.actions_used},
          {"by_type", e.by_type}};
}

json attempt_json(const Attempt& a) {
  json actions = json::array();
  for (const auto& x : a.plan.actions) actions.push_back(action_to_json(x));
  return {{"iteration", a.iteration},
          {"planner_id", a.plan.planner_id},
          {"rationale", a.plan.rationale},
          {"actions", std::move(actions)},
          {"outcome", to_string(a.outcome)},
          {"executed", a.executed},
          {"detail", a.detail},
          {"context_mode", to_string(a.context_mode)},
          {"context_tokens", a.context_tokens},
          {"before", a.before},
          {"after", a.after},
          {"effectiveness", effectiveness_json(a.effectiveness)},
          {"resolved_by_action", a.resolved_by_action}};
}

}  // namespace

json to_json(const ResolutionResult& r, bool include_timing) {
  json j;
  j["status"] = to_string(r.status);
  j["planner_id"] = r.planner_id;
  j["iterations"] = r.iterations;
  if (include_timing) j["wall_time_seconds"] = r.wall_time_seconds;
  j["initial_report"] = r.initial_report;
  j["final_report"] = r.final_report;
  json accepted = json::array();
  for (const auto& a : r.accepted_actions) {
    accepted.push_back({{"iteration", a.iteration}, {"action", action_to_json(a.action)}});
  }
  j["accepted_actions"] = std::move(accepted);
  json attempts = json::array();
  for (const auto& a : r.attempts) attempts.push_back(attempt_json(a));
  j["attempts"] = std::move(attempts);
  json metrics = r.metrics;
  if (!include_timing) metrics.erase("runtime_seconds");
  j["metrics"] = std::move(metrics);
  j["explanation"] = r.explanation;
  j["network"] = json::parse(serialize_network(r.network));
  return j;
}

}  // namespace gridagent
