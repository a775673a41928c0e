#include <functional>
#include <stdexcept>

#include "doctest.h"
#include "oracles.h"

#include "gridagent/case_io.h"
#include "gridagent/error.h"
#include "gridagent/harness.h"
#include "gridagent/workflow.h"

using namespace gridagent;

namespace {

// Hands out plans from a script; throws once the script runs out.
class ScriptedPlanner : public Planner {
 public:
  using Step = std::function<Plan(const PlanRequest&)>;
  explicit ScriptedPlanner(std::vector<Step> steps) : steps_(std::move(steps)) {}
  std::string id() const override { return "scripted"; }
  Plan plan(const PlanRequest& req) override {
    if (next_ >= steps_.size()) throw Error(ErrorCode::NoImprovingPlan, "script exhausted");
    requests.push_back(req.history);
    return steps_[next_++](req);
  }
  std::vector<std::vector<std::string>> requests;

 private:
  std::vector<Step> steps_;
  std::size_t next_ = 0;
};

ScriptedPlanner::Step fixed(std::vector<Action> actions) {
  return [actions](const PlanRequest&) { return Plan{actions, "scripted", "scripted"}; };
}

void check_monotone(const ResolutionResult& r) {
  for (const auto& a : r.attempts) {
    if (a.outcome != AttemptOutcome::Accepted) continue;
    const bool fewer = a.after.size() < a.before.size();
    const bool milder = a.after.size() == a.before.size() && a.after.total_severity < a.before.total_severity;
    CHECK((fewer || milder));
  }
}

void check_replay(const Network& input, const ResolutionResult& r) {
  Network net = input;
  for (const auto& t : r.accepted_actions) apply_action(net, t.action);
  CHECK(serialize_network(net) == serialize_network(r.network));
  CHECK(analyze(net, solve(net)).fingerprint == r.final_report.fingerprint);
}

}  // namespace

TEST_CASE("tie-switch case resolves in one step") {
  const Network net = testing::tie_switch_network();
  HeuristicPlanner planner;
  const ResolutionResult r = run(net, planner);
  CHECK(r.status == RunStatus::Resolved);
  CHECK(r.iterations == 1);
  REQUIRE(r.accepted_actions.size() == 1);
  CHECK(r.accepted_actions[0].iteration == 1);
  CHECK(r.metrics.success);
  CHECK(*r.metrics.action_efficiency == 2.0);
  CHECK(r.metrics.coordination_score == 1.0);
  CHECK(r.metrics.action_type_usage.at("switch") == 1.0);
  CHECK(r.attempts[0].resolved_by_action[0] == std::vector<std::string>{"undervoltage 4", "undervoltage 5"});
  CHECK(r.explanation.find("cleared undervoltage 4, undervoltage 5") != std::string::npos);
  CHECK(r.planner_id == "heuristic");
  check_replay(net, r);
}

TEST_CASE("a clean network needs nothing") {
  Network net = testing::tie_switch_network();
  net.set_switch_closed("T1", true);
  HeuristicPlanner planner;
  const ResolutionResult r = run(net, planner);
  CHECK(r.status == RunStatus::Resolved);
  CHECK(r.iterations == 0);
  CHECK(r.explanation.find("no action required") != std::string::npos);
  CHECK_FALSE(r.metrics.action_efficiency.has_value());
  CHECK(r.metrics.coordination_score == 1.0);
}

TEST_CASE("worsening plans are rolled back exactly") {
  const Network net = scenario_network(build_preset(scenario_preset("cigre_mv_severe")));
  testing::AdversarialPlanner planner;
  const ResolutionResult r = run(net, planner, {.t_max = 4});
  CHECK(r.status == RunStatus::Exhausted);
  CHECK(r.iterations == 4);
  CHECK(r.accepted_actions.empty());
  for (const auto& a : r.attempts) CHECK(a.outcome == AttemptOutcome::RolledBack);
  CHECK(serialize_network(r.network) == serialize_network(net));
  CHECK(r.final_report == r.initial_report);
}

TEST_CASE("an invalid action aborts and restores; history carries the reason") {
  const Network net = testing::tie_switch_network();
  ScriptedPlanner planner({fixed({SetSwitch{"S1", false}, SetSwitch{"ghost", true}}), fixed({SetSwitch{"T1", true}})});
  const ResolutionResult r = run(net, planner);
  REQUIRE(r.attempts.size() == 2);
  CHECK(r.attempts[0].outcome == AttemptOutcome::Aborted);
  CHECK(r.attempts[0].executed == 1);
  CHECK(r.attempts[0].detail.find("ghost") != std::string::npos);
  CHECK(planner.requests[0].empty());
  REQUIRE(planner.requests[1].size() == 1);
  CHECK(planner.requests[1][0].find("ghost") != std::string::npos);
  CHECK(r.status == RunStatus::Resolved);
  check_replay(net, r);
}

TEST_CASE("solver divergence mid-plan aborts") {
  const Network net = builtin_network("cigre_mv");
  const std::string bus = net.buses().back().id;
  const std::string bat = battery_id_for(net, bus);
  ScriptedPlanner planner({fixed({AddBattery{bus, 1e5, 1e5, 1e5}, DispatchBattery{bat, -9e4, -3e4}})});
  const ResolutionResult r = run(scenario_network(build_preset(scenario_preset("cigre_mv_severe"))), planner,
                                 {.t_max = 1});
  REQUIRE(r.attempts.size() == 1);
  CHECK(r.attempts[0].outcome == AttemptOutcome::Aborted);
  CHECK(r.attempts[0].executed == 2);
  CHECK(r.network.placed_battery_count() == 0);
  CHECK(r.status == RunStatus::Exhausted);
}

TEST_CASE("resolution mid-plan drops the unexecuted tail") {
  const Network net = testing::tie_switch_network();
  ScriptedPlanner planner({fixed({SetSwitch{"T1", true}, SetSwitch{"S1", false}})});
  const ResolutionResult r = run(net, planner);
  CHECK(r.status == RunStatus::Resolved);
  CHECK(r.attempts[0].executed == 1);
  CHECK(r.attempts[0].plan.actions.size() == 1);
  CHECK(r.accepted_actions.size() == 1);
  check_replay(net, r);
}

TEST_CASE("planner errors and empty plans") {
  const Network net = testing::tie_switch_network();
  SUBCASE("immediate planner error fails the run") {
    ScriptedPlanner planner({});
    const ResolutionResult r = run(net, planner);
    CHECK(r.status == RunStatus::Failed);
    REQUIRE(r.attempts.size() == 1);
    CHECK(r.attempts[0].outcome == AttemptOutcome::PlannerError);
    CHECK(r.attempts[0].detail.find("NoImprovingPlan") != std::string::npos);
  }
  SUBCASE("empty plan is an aborted iteration") {
    ScriptedPlanner planner({fixed({}), fixed({SetSwitch{"T1", true}})});
    const ResolutionResult r = run(net, planner);
    CHECK(r.attempts[0].outcome == AttemptOutcome::Aborted);
    CHECK(r.status == RunStatus::Resolved);
  }
  SUBCASE("no-op plans exhaust t_max") {
    std::vector<ScriptedPlanner::Step> steps(3, fixed({SetSwitch{"S1", true}}));
    ScriptedPlanner planner(steps);
    const ResolutionResult r = run(net, planner, {.t_max = 3});
    CHECK(r.status == RunStatus::Exhausted);
    CHECK(r.iterations == 3);
    for (const auto& a : r.attempts) CHECK(a.outcome == AttemptOutcome::RolledBack);
  }
  SUBCASE("t_max = 0 never calls the planner") {
    ScriptedPlanner planner({});
    const ResolutionResult r = run(net, planner, {.t_max = 0});
    CHECK(r.status == RunStatus::Exhausted);
    CHECK(r.iterations == 0);
  }
}

TEST_CASE("multi-iteration runs are monotone and replayable") {
  for (const char* name : {"cigre_mv_severe", "cigre_mv_disconnected", "case30_light", "ieee69_large_loads"}) {
    CAPTURE(name);
    const Network net = scenario_network(build_preset(scenario_preset(name)));
    HeuristicPlanner planner;
    const ResolutionResult r = run(net, planner);
    CHECK(r.iterations <= kDefaultTMax);
    check_monotone(r);
    check_replay(net, r);
    CHECK(r.metrics.coordination_score >= 0.0);
    CHECK(r.metrics.coordination_score <= 1.0);
  }
}

TEST_CASE("coordination measures distance to the violations seen at planning time") {
  const Network net = testing::tie_switch_network();
  HeuristicPlanner planner;
  ResolutionResult r = run(net, planner);
  CHECK(compute_metrics(r, r.initial_report, net, 0).coordination_score == 1.0);  // T1 touches bus 5
  r.attempts[0].before.violations.erase(r.attempts[0].before.violations.begin() + 1);  // keep only bus 4
  CHECK(compute_metrics(r, r.initial_report, net, 0).coordination_score == 0.0);
  CHECK(compute_metrics(r, r.initial_report, net, 1).coordination_score == 1.0);
}

TEST_CASE("effectiveness bookkeeping") {
  using K = ViolationKind;
  const auto before = make_report({{K::Undervoltage, "4", 0.94, 0.95, 0.01}, {K::Undervoltage, "5", 0.93, 0.95, 0.02}});
  const auto after = make_report({{K::Thermal, "1-2", 1.1, 1.0, 0.1}});
  const Plan plan{{SetSwitch{"T1", true}, CurtailLoad{"L2", 0.1}}, "", ""};
  const Effectiveness e = evaluate_effectiveness(before, after, plan);
  CHECK(e.resolved_count == 2);
  CHECK(e.introduced_count == 1);
  CHECK(e.actions_used == 2);
  CHECK(e.by_type.at("switch") == 1);
  CHECK(evaluate_effectiveness(before, after, plan, false).resolved_count == 0);
}

TEST_CASE("result JSON is stable and actions round trip") {
  const Network net = scenario_network(build_preset(scenario_preset("cigre_mv_severe")));
  HeuristicPlanner a, b;
  const auto ra = run(net, a);
  const auto rb = run(net, b);
  CHECK(to_json(ra, false).dump() == to_json(rb, false).dump());
  CHECK(to_json(ra, true).contains("wall_time_seconds"));
  CHECK_FALSE(to_json(ra, false).contains("wall_time_seconds"));
  CHECK(to_json(ra, false)["status"] == "resolved");

  const std::vector<Action> all = {SetSwitch{"S", false}, CurtailLoad{"L", 0.25}, AddBattery{"7", 2.0, 1.5, 1.0},
                                   DispatchBattery{"BAT1", -0.5, 0.75}};
  for (const auto& act : all) CHECK(action_from_json(action_to_json(act)) == act);
  CHECK(action_to_json(all[0])["type"] == "set_switch");
  CHECK_THROWS(action_from_json(nlohmann::json{{"type", "teleport"}}));
}
