#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "oracles.h"

#include "gridagent/case_io.h"
#include "gridagent/error.h"
#include "gridagent/harness.h"

using namespace gridagent;
using nlohmann::json;

namespace {

Scenario tie_scenario() { return {"tie_switch", testing::data_path("tie_switch_demo.gridcase.json"), {}, std::nullopt}; }

PlannerFactory heuristic() {
  return [] { return std::make_unique<HeuristicPlanner>(SolveOptions{}, kernels::Execution::Serial); };
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("gridagent_test_" + name);
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("perturbations") {
  const NetworkData base = builtin_case("cigre_mv").network;
  const std::string br = base.branches[3].id;
  const NetworkData d = apply_perturbations(base, {ScaleLoad{1.5}, DerateBranch{br, 0.5}, OpenBranch{base.branches[4].id}});
  CHECK(d.loads[0].p_mw == base.loads[0].p_mw * 1.5);
  CHECK(d.branches[3].s_max_mva == base.branches[3].s_max_mva * 0.5);
  CHECK_FALSE(d.branches[4].in_service);
  CHECK_THROWS_AS(apply_perturbations(base, {OpenBranch{"nope"}}), Error);
  CHECK_THROWS_AS(apply_perturbations(base, {ForceSwitch{"nope", true}}), Error);

  const Scenario s{"x", "cigre_mv", {ScaleLoad{1.2}, ForceSwitch{base.switches[0].id, false}, DerateBranch{br, 0.9}},
                   ViolationProfile{3, {1, 0, 2, 0}}};
  json j = s;
  CHECK(j.get<Scenario>() == s);
}

TEST_CASE("generation is reproducible and meets its target") {
  const Network base = builtin_network("ieee69");
  const ScenarioTarget target{6, {ViolationKind::Undervoltage}, {}};
  const Scenario a = generate_scenario("ieee69", base, target, 5);
  const Scenario b = generate_scenario("ieee69", base, target, 5);
  CHECK(a == b);
  CHECK(json(a).dump() == json(b).dump());
  const ViolationReport r = analyze(scenario_network(a), solve(scenario_network(a)));
  CHECK(static_cast<int>(r.size()) >= 6);
  CHECK(r.counts.undervoltage > 0);
  REQUIRE(a.expected_violation_profile);
  CHECK(a.expected_violation_profile->total == static_cast<int>(r.size()));

  const ScenarioTarget thermal{3, {ViolationKind::Thermal}, {{ViolationKind::Thermal, 3}}};
  const Scenario t = generate_scenario("cigre_mv", builtin_network("cigre_mv"), thermal, 9);
  CHECK(analyze(scenario_network(t), solve(scenario_network(t))).counts.thermal >= 3);

  try {
    generate_scenario("ieee69", base, {1, {ViolationKind::Overvoltage}, {}}, 1);
    FAIL("overvoltage should be unreachable by load scaling");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TargetUnreachable);
  }
}

TEST_CASE("presets reach at least their targets") {
  for (const auto& p : scenario_presets()) {
    CAPTURE(p.name);
    const Scenario s = build_preset(p);
    const ViolationReport r = analyze(scenario_network(s), solve(scenario_network(s)));
    CHECK(static_cast<int>(r.size()) >= p.target.count);
    for (auto k : p.target.kinds) CHECK(r.counts.of(k) > 0);
    for (auto [k, n] : p.target.min_by_kind) CHECK(r.counts.of(k) >= n);
  }
  CHECK(build_preset(scenario_preset("cigre_mv_severe")).expected_violation_profile->total >= 14);
  CHECK_THROWS_AS(scenario_preset("nope"), Error);
}

TEST_CASE("aggregates equal hand-computed statistics") {
  BenchmarkReport rep;
  rep.rows = {{"a", 0, "resolved", true, 2, 0, 1, 1, 2.0, 1.0, 0.5, ""},
              {"b", 0, "exhausted", false, 5, 1, 10, 6, 0.5, 0.5, 1.5, ""},
              {"c", 0, "failed", false, 3, 3, 1, 0, std::nullopt, 1.0, 1.0, "NoImprovingPlan"}};
  aggregate(rep);
  CHECK(rep.success_rate == doctest::Approx(1.0 / 3.0));
  CHECK(rep.mean_iterations == doctest::Approx(4.0));
  CHECK(rep.mean_actions == doctest::Approx(7.0 / 3.0));
  CHECK(rep.mean_runtime_seconds == doctest::Approx(1.0));
  CHECK(*rep.mean_action_efficiency == doctest::Approx(1.25));
  const json j = to_json(rep);
  CHECK_FALSE(j.dump().find("runtime") != std::string::npos);
  CHECK(to_json(rep, true).dump().find("runtime") != std::string::npos);
  const std::string table = format_table(rep);
  CHECK(table.find("exhausted") != std::string::npos);
  CHECK(table.find("33.3%") != std::string::npos);
}

TEST_CASE("benchmark output does not depend on job count") {
  const std::vector<Scenario> suite = {tie_scenario(), build_preset(scenario_preset("cigre_mv_severe")),
                                       build_preset(scenario_preset("case30_medium"))};
  BenchmarkOptions one;
  BenchmarkOptions many;
  many.jobs = 3;
  many.repetitions = 2;
  one.repetitions = 2;
  int seen = 0;
  many.on_run = [&](const RunRecord&, int) { ++seen; };
  const auto a = run_benchmark(suite, heuristic(), one);
  const auto b = run_benchmark(suite, heuristic(), many);
  CHECK(seen == 6);
  CHECK(a.rows.size() == 6);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.rows[0].scenario == "tie_switch");
  CHECK(a.rows[1].repetition == 1);
  CHECK(a.success_rate == 1.0);
}

TEST_CASE("export and replay") {
  HeuristicPlanner planner;
  std::vector<RunRecord> runs;
  runs.push_back(run_scenario(tie_scenario(), planner));
  runs.push_back(run_scenario(build_preset(scenario_preset("cigre_mv_severe")), planner));
  runs.push_back(run_scenario(build_preset(scenario_preset("ieee69_disconnected")), planner));  // fails

  SUBCASE("run records survive JSON") {
    for (const auto& r : runs) {
      const RunRecord back = run_record_from_json(json::parse(run_record_to_json(r).dump()));
      CHECK(back.scenario == r.scenario);
      CHECK(back.initial_case == r.initial_case);
      CHECK(to_json(back.result, true).dump() == to_json(r.result, true).dump());
    }
  }
  SUBCASE("jsonl") {
    const auto path = temp_file("export.jsonl");
    const ExportSummary s = export_training_data(runs, ExportFormat::Jsonl, path.string());
    CHECK(s.written == 2);
    CHECK(s.skipped == 1);
    const auto lines = lines_of(path);
    REQUIRE(lines.size() == 2);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const TrainingRecord rec = training_record_from_json(json::parse(lines[i]));
      CHECK(rec == *make_training_record(runs[i]));
      CHECK(replay_matches(rec));
      TrainingRecord tampered = rec;
      tampered.actions.pop_back();
      CHECK_FALSE(replay_matches(tampered));
    }
    std::filesystem::remove(path);
  }
  SUBCASE("chat_jsonl assistant turns parse back to the plan") {
    const auto path = temp_file("export_chat.jsonl");
    export_training_data(runs, ExportFormat::ChatJsonl, path.string());
    const auto lines = lines_of(path);
    REQUIRE(lines.size() == 2);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const json j = json::parse(lines[i]);
      REQUIRE(j["messages"].size() == 3);
      CHECK(j["messages"][0]["role"] == "system");
      CHECK(j["messages"][2]["role"] == "assistant");
      const TrainingRecord rec = *make_training_record(runs[i]);
      const CaseDocument initial = parse_case_json(j["metadata"]["initial_case"].dump());
      const Plan plan =
          parse_tool_calls(j["messages"][2]["content"].get<std::string>(), describe_capabilities(network_from_case(initial)));
      CHECK(plan.actions == rec.actions);
      CHECK(plan.rationale == rec.rationale);
    }
    std::filesystem::remove(path);
  }
  SUBCASE("unwritable path") {
    try {
      export_training_data(runs, ExportFormat::Jsonl, "/nonexistent-dir/x.jsonl");
      FAIL("wrote to a missing directory");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::WriteError);
    }
  }
}
