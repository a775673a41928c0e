#include <cstdlib>

#include "doctest.h"
#include "json.hpp"
#include "oracles.h"

#include "gridagent/case_io.h"
#include "gridagent/error.h"
#include "gridagent/harness.h"
#include "gridagent/planner.h"
#include "gridagent/workflow.h"

using namespace gridagent;
using nlohmann::json;

namespace {

struct Request {
  Network net;
  PlanRequest req;
};

// Heap-allocated so req.network stays valid when the holder moves.
std::unique_ptr<Request> make_request(Network net, std::size_t budget = kDefaultTokenBudget) {
  auto r = std::make_unique<Request>();
  r->net = std::move(net);
  const PowerFlowSolution sol = solve(r->net);
  r->req.report = analyze(r->net, sol);
  r->req.context = render_context(r->net, sol, r->req.report, budget);
  r->req.available_actions = describe_capabilities(r->net);
  r->req.t_max_remaining = 10;
  r->req.network = &r->net;
  return r;
}

ErrorCode parse_code(std::string_view text, const Capabilities& caps, std::string* msg = nullptr) {
  try {
    parse_tool_calls(text, caps);
  } catch (const Error& e) {
    if (msg) *msg = e.what();
    return e.code();
  }
  FAIL("parsed: " << text);
  return ErrorCode::SchemaMismatch;
}

std::string body(const std::string& content) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

}  // namespace

TEST_CASE("capabilities reflect the network") {
  const Network net = builtin_network("cigre_mv");
  const Capabilities caps = describe_capabilities(net);
  CHECK(caps.switches.size() == net.switches().size());
  CHECK(static_cast<int>(caps.switches.size() + caps.curtailable_loads.size()) == controllable_element_count(net));
  CHECK(caps.battery_budget_remaining == net.battery_budget());
  CHECK(caps.bus_ids.size() == net.buses().size());
  CHECK(caps.switches[0].from_bus == net.branch(caps.switches[0].branch_id).from_bus);
}

TEST_CASE("heuristic closes the tie switch") {
  auto r = make_request(testing::tie_switch_network());
  const SandboxEvaluator eval(r->net, {});
  const Plan plan = plan_heuristic(r->req, eval.callback());
  REQUIRE(plan.actions.size() == 1);
  CHECK(plan.actions[0] == Action{SetSwitch{"T1", true}});
  CHECK(plan.planner_id == "heuristic");
  CHECK_FALSE(plan.rationale.empty());
}

TEST_CASE("heuristic plans are deterministic, valid and follow the priority order") {
  for (const auto& p : scenario_presets()) {
    if (p.name == "ieee69_medium_loads") continue;  // slow; covered by the acceptance run
    CAPTURE(p.name);
    auto r = make_request(scenario_network(build_preset(p)));
    HeuristicPlanner serial({}, kernels::Execution::Serial);
    HeuristicPlanner parallel({}, kernels::Execution::Parallel);
    Plan a, b;
    try {
      a = serial.plan(r->req);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoImprovingPlan);
      CHECK_THROWS_AS(parallel.plan(r->req), Error);
      continue;
    }
    b = parallel.plan(r->req);
    CHECK(a.actions == b.actions);
    CHECK(a.rationale == b.rationale);

    // Every action validates in sequence on the originating network.
    Network scratch = r->net;
    for (const auto& act : a.actions) {
      CHECK_FALSE(validate_action(scratch, act));
      apply_action(scratch, act);
    }

    bool curtails = false;
    for (const auto& act : a.actions) curtails |= std::holds_alternative<CurtailLoad>(act);
    if (curtails) {
      // No single toggle within the focus radius would have helped.
      const SandboxEvaluator eval(r->net, {});
      const auto dist = violation_distances(r->net, r->req.report.violations);
      for (const auto& s : r->net.switches()) {
        const Branch& br = r->net.branch(s.branch_id);
        const int df = dist[*r->net.bus_index(br.from_bus)], dt = dist[*r->net.bus_index(br.to_bus)];
        const bool near = (df >= 0 && df <= r->req.focus_hops) || (dt >= 0 && dt <= r->req.focus_hops);
        if (!near) continue;
        const auto rep = eval.evaluate({SetSwitch{s.id, !s.closed}});
        CHECK((!rep || !improves(r->req.report, *rep)));
      }
    }
  }
}

TEST_CASE("no improving plan on an isolated radial section") {
  auto r = make_request(scenario_network(build_preset(scenario_preset("ieee69_disconnected"))));
  HeuristicPlanner planner;
  try {
    planner.plan(r->req);
    FAIL("expected NoImprovingPlan");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoImprovingPlan);
  }
}

TEST_CASE("sandbox evaluation leaves the base untouched") {
  const Network net = builtin_network("cigre_mv");
  const std::string before = serialize_network(net);
  const SandboxEvaluator eval(net, {});
  std::vector<std::vector<Action>> plans;
  for (const auto& s : net.switches()) plans.push_back({SetSwitch{s.id, !s.closed}});
  plans.push_back({SetSwitch{"ghost", true}});
  const auto batch = eval.evaluate_batch(plans);
  REQUIRE(batch.size() == plans.size());
  CHECK_FALSE(batch.back().has_value());
  for (std::size_t i = 0; i + 1 < plans.size(); ++i) CHECK(batch[i] == eval.evaluate(plans[i]));
  CHECK(serialize_network(net) == before);
}

TEST_CASE("prompt layout") {
  auto r = make_request(testing::tie_switch_network());
  Prompt p = build_prompt(r->req);
  CHECK(p.system.find("expert power system operator") != std::string::npos);
  CHECK(p.system.find("update_switch_status") != std::string::npos);
  CHECK(p.system.find("T1") != std::string::npos);
  CHECK(p.system.find(kPriorityPolicy) != std::string::npos);
  CHECK(p.system.find(r->req.context.text) != std::string::npos);
  CHECK(p.user.find("undervoltage") != std::string::npos);
  CHECK(p.user.find("Previous attempts") == std::string::npos);
  r->req.history = {"iteration 1: opened S1, rolled back"};
  p = build_prompt(r->req);
  CHECK(p.user.find("Previous attempts that were rejected:") != std::string::npos);
  CHECK(p.user.find("opened S1") != std::string::npos);
}

TEST_CASE("parse_tool_calls") {
  const Network net = builtin_network("cigre_mv");
  const Capabilities caps = describe_capabilities(net);
  const std::string sw = caps.switches[0].id;
  const std::string load = caps.curtailable_loads[0].id;
  const std::string bus = caps.bus_ids[4];

  SUBCASE("clean object with every tool") {
    const std::string bat = next_battery_id(net);
    const json doc = {{"actions",
                       {{{"tool", "update_switch_status"}, {"args", {{"switch_id", sw}, {"closed", false}}}},
                        {{"tool", "curtail_load"}, {"args", {{"load_id", load}, {"gamma", 0.2}}}},
                        {{"tool", "add_battery"}, {"args", {{"bus_id", bus}, {"p_mw", 1.0}, {"q_mvar", 0.5}}}},
                        {{"tool", "dispatch_battery"}, {"args", {{"battery_id", bat}, {"p_mw", 0.0}, {"q_mvar", 2.0}}}}}},
                      {"rationale", "mixed"}};
    const Plan plan = parse_tool_calls("Here you go:\n" + doc.dump(2) + "\nthanks", caps, "m");
    REQUIRE(plan.actions.size() == 5);  // add_battery with p/q expands to add + dispatch
    CHECK(plan.actions[0] == Action{SetSwitch{sw, false}});
    CHECK(plan.actions[2] == Action{ActionConfig{}.default_battery(bus)});
    CHECK(plan.actions[3] == Action{DispatchBattery{bat, 1.0, 0.5}});
    CHECK(plan.rationale == "mixed");
    CHECK(plan.planner_id == "m");
  }
  SUBCASE("fenced bare array") {
    const std::string text = "```json\n[{\"tool\": \"curtail_load\", \"args\": {\"load_id\": \"" + load +
                             "\", \"gamma\": 0.1}}]\n```";
    const Plan plan = parse_tool_calls(text, caps);
    CHECK(plan.actions.size() == 1);
  }
  SUBCASE("braces inside strings do not confuse the scan") {
    const std::string text = "{\"actions\": [{\"tool\": \"curtail_load\", \"args\": {\"load_id\": \"" + load +
                             "\", \"gamma\": 0.1}}], \"rationale\": \"a } tricky { one\"}";
    CHECK(parse_tool_calls(text, caps).rationale == "a } tricky { one");
  }
  SUBCASE("failures") {
    std::string msg;
    CHECK(parse_code("no json here", caps) == ErrorCode::NoJsonFound);
    CHECK(parse_code("{\"rationale\": \"x\"}", caps) == ErrorCode::SchemaMismatch);
    CHECK(parse_code("{\"actions\": [], \"rationale\": \"x\"}", caps) == ErrorCode::SchemaMismatch);
    CHECK(parse_code("{\"actions\": [{\"tool\": \"explode\", \"args\": {}}]}", caps) == ErrorCode::UnknownTool);
    CHECK(parse_code("{\"actions\": [{\"tool\": \"curtail_load\", \"args\": {\"load_id\": \"" + load +
                         "\", \"gamma\": 0.9}}]}",
                     caps, &msg) == ErrorCode::InvalidArguments);
    CHECK(msg.find("action 0") != std::string::npos);
    CHECK(parse_code("{\"actions\": [{\"tool\": \"update_switch_status\", \"args\": {\"switch_id\": \"" + sw +
                         "\", \"closed\": \"yes\"}}]}",
                     caps) == ErrorCode::InvalidArguments);
    CHECK(parse_code("{\"actions\": [{\"tool\": \"update_switch_status\", \"args\": {\"switch_id\": \"" + sw +
                         "\", \"closed\": true, \"force\": 1}}]}",
                     caps) == ErrorCode::InvalidArguments);
    CHECK(parse_code("{\"actions\": [{\"tool\": \"dispatch_battery\", \"args\": {\"battery_id\": \"BAT1\", "
                     "\"p_mw\": 0, \"q_mvar\": 1}}]}",
                     caps) == ErrorCode::InvalidArguments);
    // The budget is tracked across the plan.
    json many = {{"actions", json::array()}};
    for (int i = 0; i < 4; ++i) many["actions"].push_back({{"tool", "add_battery"}, {"args", {{"bus_id", caps.bus_ids[static_cast<std::size_t>(i + 2)]}}}});
    CHECK(parse_code(many.dump(), caps, &msg) == ErrorCode::InvalidArguments);
    CHECK(msg.find("action 3") != std::string::npos);
  }
}

TEST_CASE("tool JSON round trips") {
  const Network net = builtin_network("cigre_mv");
  const Capabilities caps = describe_capabilities(net);
  const std::string bus = caps.bus_ids[6];
  const Plan plan{{SetSwitch{caps.switches[1].id, false}, CurtailLoad{caps.curtailable_loads[1].id, 0.3},
                   ActionConfig{}.default_battery(bus), DispatchBattery{battery_id_for(net, bus), -1.5, 2.25}},
                  "because",
                  "llm"};
  const Plan back = parse_tool_calls(plan_to_tool_json(plan), caps);
  CHECK(back.actions == plan.actions);
  CHECK(back.rationale == plan.rationale);
}

TEST_CASE("client configuration") {
  setenv("GRID_AGENT_LLM_ENDPOINT", "https://example.invalid/v1/chat/completions", 1);
  setenv("GRID_AGENT_LLM_MODEL", "env-model", 1);
  LlmClientConfig cfg = LlmClientConfig::from_env();
  CHECK(cfg.endpoint == "https://example.invalid/v1/chat/completions");
  CHECK(cfg.model == "env-model");
  CHECK(LlmClientConfig::from_env("", "explicit").model == "explicit");
  cfg.timeout_seconds = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.timeout_seconds = 5.0;
  cfg.max_retries = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  unsetenv("GRID_AGENT_LLM_ENDPOINT");
  unsetenv("GRID_AGENT_LLM_MODEL");

  ChatRequest req{"m", {{"system", "s"}, {"user", "u"}}, 0.2, 1024};
  const json b = chat_request_body(req);
  CHECK(b["model"] == "m");
  CHECK(b["messages"][1]["content"] == "u");
  CHECK(b["temperature"] == 0.2);
  CHECK(b["thinking_budget"] == 1024);
  req.temperature.reset();
  req.thinking_budget.reset();
  CHECK_FALSE(chat_request_body(req).contains("temperature"));

  CHECK(chat_response_text(body("hi")) == "hi");
  CHECK_THROWS_AS(chat_response_text("not json"), Error);
  CHECK_THROWS_AS(chat_response_text(testing::read_file(testing::fixture_path("llm/malformed_body.json"))), Error);
}

TEST_CASE("LLM planner against recorded replies") {
  auto r = make_request(testing::tie_switch_network());
  LlmClientConfig cfg;
  cfg.model = "fixture-model";
  auto fixture = [](std::initializer_list<const char*> names) {
    testing::FixtureTransport t;
    for (const char* n : names) t.replies.push_back(testing::read_file(testing::fixture_path(std::string("llm/") + n)));
    return t;
  };

  SUBCASE("clean") {
    auto t = fixture({"clean.json"});
    const Plan plan = plan_llm(r->req, cfg, t.transport());
    CHECK(plan.actions == std::vector<Action>{SetSwitch{"T1", true}});
    CHECK(plan.planner_id == "fixture-model");
    CHECK(t.requests.size() == 1);
    CHECK(t.requests[0].messages.size() == 2);
  }
  SUBCASE("one repair round") {
    auto t = fixture({"unknown_tool.json", "repaired.json"});
    const Plan plan = plan_llm(r->req, cfg, t.transport());
    CHECK(plan.actions == std::vector<Action>{SetSwitch{"T1", true}});
    REQUIRE(t.requests.size() == 2);
    const auto& msgs = t.requests[1].messages;
    REQUIRE(msgs.size() == 4);
    CHECK(msgs[2].role == "assistant");
    CHECK(msgs[3].content.find("UnknownTool") != std::string::npos);
  }
  SUBCASE("hard failure") {
    auto t = fixture({"no_json.json", "bad_args.json"});
    try {
      plan_llm(r->req, cfg, t.transport());
      FAIL("expected UnparseableAfterRepair");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnparseableAfterRepair);
    }
    CHECK(t.requests.size() == 2);
  }
  SUBCASE("transport errors are retried, then surface") {
    auto t = fixture({"malformed_body.json", "clean.json"});
    cfg.max_retries = 1;
    CHECK(plan_llm(r->req, cfg, t.transport()).actions.size() == 1);
    auto dead = fixture({"malformed_body.json", "malformed_body.json"});
    try {
      plan_llm(r->req, cfg, dead.transport());
      FAIL("expected TransportError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TransportError);
    }
  }
  SUBCASE("LlmPlanner wraps the same contract") {
    auto t = fixture({"clean.json"});
    LlmPlanner planner(cfg, t.transport());
    CHECK(planner.id() == "fixture-model");
    CHECK(planner.plan(r->req).actions.size() == 1);
  }
}
