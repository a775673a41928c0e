#include <stdexcept>

#include "doctest.h"
#include "oracles.h"

#include "gridagent/case_io.h"
#include "gridagent/harness.h"
#include "gridagent/representation.h"

using namespace gridagent;

namespace {

struct Solved {
  Network net;
  PowerFlowSolution sol;
  ViolationReport report;
};

Solved solved(Network net) {
  PowerFlowSolution sol = solve(net);
  ViolationReport report = analyze(net, sol);
  return {std::move(net), std::move(sol), std::move(report)};
}

std::vector<Solved> corpus() {
  std::vector<Solved> out;
  out.push_back(solved(testing::tie_switch_network()));
  for (const auto& p : scenario_presets()) {
    if (p.name == "ieee69_medium_loads" || p.name == "case30_medium" || p.name == "cigre_mv_severe") {
      out.push_back(solved(scenario_network(build_preset(p))));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("token estimate is ceil(chars / 4)") {
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("abcd") == 1);
  CHECK(estimate_tokens("abcde") == 2);
}

TEST_CASE("every violated element appears in both renderings") {
  for (const auto& s : corpus()) {
    REQUIRE_FALSE(s.report.empty());
    const auto full = render_full(s.net, s.sol, s.report);
    const auto sem = render_semantic_graph(s.net, s.sol, s.report, 1);
    CHECK(full.mode == ContextMode::FullDetail);
    CHECK(sem.mode == ContextMode::SemanticGraph);
    CHECK(full.token_estimate == estimate_tokens(full.text));
    for (const auto& v : s.report.violations) {
      CHECK(full.text.find(v.element) != std::string::npos);
      CHECK(sem.text.find(v.element) != std::string::npos);
      CHECK(sem.included_elements.contains(v.element));
    }
    CHECK(sem.focus_violations == s.report.violations);
  }
}

TEST_CASE("pruning shrinks the context and leaves one line per section") {
  const Network net = scenario_network(build_preset(scenario_preset("case30_medium")));
  const auto s = solved(net);
  const auto full = render_full(s.net, s.sol, s.report);
  const auto sem = render_semantic_graph(s.net, s.sol, s.report, 3);
  CHECK(sem.token_estimate <= full.token_estimate);
  CHECK(sem.text.find("Pruned healthy sections (3)") != std::string::npos);
  CHECK(sem.text.find("bus 18") != std::string::npos);  // summarized, not listed
  CHECK(sem.text.find("\nbus 18 [") == std::string::npos);
  CHECK_FALSE(sem.included_elements.contains("18"));

  const auto tight = render_semantic_graph(s.net, s.sol, s.report, 1);
  CHECK(tight.token_estimate < sem.token_estimate);
}

TEST_CASE("rendering is deterministic") {
  for (const auto& s : corpus()) {
    CHECK(render_full(s.net, s.sol, s.report).text == render_full(s.net, s.sol, s.report).text);
    CHECK(render_semantic_graph(s.net, s.sol, s.report).text == render_semantic_graph(s.net, s.sol, s.report).text);
  }
}

TEST_CASE("mode choice is inclusive at the budget") {
  const auto s = solved(testing::tie_switch_network());
  const std::size_t need = render_full(s.net, s.sol, s.report).token_estimate;
  CHECK(choose_mode(s.net, s.sol, s.report, need) == ContextMode::FullDetail);
  CHECK(choose_mode(s.net, s.sol, s.report, need - 1) == ContextMode::SemanticGraph);
  CHECK(render_context(s.net, s.sol, s.report, need - 1).mode == ContextMode::SemanticGraph);
  CHECK_THROWS_AS(render_semantic_graph(s.net, s.sol, s.report, 0), std::invalid_argument);
}

TEST_CASE("violation distances use the physical graph") {
  const auto s = solved(testing::tie_switch_network());
  const auto d = violation_distances(s.net, s.report.violations);
  CHECK(d[*s.net.bus_index("5")] == 0);
  CHECK(d[*s.net.bus_index("4")] == 0);
  CHECK(d[*s.net.bus_index("7")] == 1);  // across the open tie
  CHECK(d[*s.net.bus_index("6")] == 2);
  CHECK(d[*s.net.bus_index("1")] == 3);
}
