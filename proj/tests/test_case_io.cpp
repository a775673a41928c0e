#include <random>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "oracles.h"

#include "gridagent/case_io.h"
#include "gridagent/error.h"

using namespace gridagent;
using nlohmann::json;

namespace {

ErrorCode parse_code(const std::string& text, std::string* message = nullptr) {
  try {
    parse_case_json(text);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("parse_case_json accepted: " << text.substr(0, 80));
  return ErrorCode::SchemaError;
}

std::string tie_text() { return testing::read_file(testing::data_path("tie_switch_demo.gridcase.json")); }

}  // namespace

TEST_CASE("builtins carry the published element counts") {
  struct Row {
    const char* name;
    std::size_t buses, lines, loads;
    int controllable;
  };
  for (const Row& r : {Row{"ieee30", 30, 41, 20, 3}, Row{"cigre_mv", 14, 15, 11, 9}, Row{"ieee69", 69, 68, 59, 8}}) {
    CAPTURE(r.name);
    const Network net = builtin_network(r.name);
    CHECK(net.buses().size() == r.buses);
    CHECK(net.branches().size() == r.lines);
    CHECK(net.loads().size() == r.loads);
    CHECK(controllable_element_count(net) == r.controllable);
  }
  CHECK_THROWS_AS(builtin_case("ieee118"), Error);
}

TEST_CASE("serialize / parse round trip is exact") {
  for (const auto& name : builtin_names()) {
    const CaseDocument doc = builtin_case(name);
    const std::string text = serialize_case(doc);
    const CaseDocument back = parse_case_json(text);
    CHECK(back == doc);
    CHECK(serialize_case(back) == text);
  }
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    CaseDocument doc;
    doc.network = testing::random_network_data(rng, {.with_controls = true});
    std::uniform_real_distribution<double> u(0.0, 0.5);
    for (auto& l : doc.network.loads) l.gamma = l.curtailable ? u(rng) : 0.0;
    if (i % 3 == 0) doc.scenario.load_scale = 1.5;
    const CaseDocument back = parse_case_json(serialize_case(doc));
    CHECK(back == doc);
  }
}

TEST_CASE("syntax errors carry a position") {
  std::string text = tie_text();
  text.insert(text.find("\"buses\""), "@");
  std::string msg;
  CHECK(parse_code(text, &msg) == ErrorCode::SyntaxError);
  CHECK(msg.find("line 5") != std::string::npos);
}

TEST_CASE("schema errors name the offending field") {
  json doc = json::parse(tie_text());
  SUBCASE("missing field") {
    doc["buses"][2].erase("nominal_kv");
    std::string msg;
    CHECK(parse_code(doc.dump(), &msg) == ErrorCode::SchemaError);
    CHECK(msg.find("/buses/2") != std::string::npos);
    CHECK(msg.find("nominal_kv") != std::string::npos);
  }
  SUBCASE("wrong type") {
    doc["branches"][0]["r_ohm"] = "0.5";
    std::string msg;
    CHECK(parse_code(doc.dump(), &msg) == ErrorCode::SchemaError);
    CHECK(msg.find("/branches/0/r_ohm") != std::string::npos);
  }
  SUBCASE("unknown version") {
    doc["schema_version"] = "9.9";
    CHECK(parse_code(doc.dump()) == ErrorCode::SchemaError);
  }
  SUBCASE("unknown bus kind") {
    doc["buses"][0]["kind"] = "swing";
    CHECK(parse_code(doc.dump()) == ErrorCode::SchemaError);
  }
}

TEST_CASE("semantic errors come from network validation") {
  json doc = json::parse(tie_text());
  SUBCASE("dangling bus") {
    doc["loads"][0]["bus_id"] = "99";
    CHECK(parse_code(doc.dump()) == ErrorCode::SemanticError);
  }
  SUBCASE("overlay names an unknown branch") {
    doc["scenario"] = {{"open_branches", {"nope"}}};
    CHECK(parse_code(doc.dump()) == ErrorCode::SemanticError);
  }
}

TEST_CASE("overlay is applied on load and dropped by case_from_network") {
  CaseDocument doc = parse_case_json(tie_text());
  doc.scenario.load_scale = 2.0;
  doc.scenario.switch_states["T1"] = true;
  const Network net = network_from_case(doc);
  CHECK(net.load(doc.network.loads[0].id).p_mw == doc.network.loads[0].p_mw * 2.0);
  CHECK(net.switch_("T1").closed);
  const CaseDocument flat = case_from_network(net);
  CHECK(flat.scenario.empty());
  CHECK(network_from_case(parse_case_json(serialize_case(flat))) == net);
}

TEST_CASE("MATPOWER subset") {
  std::vector<std::string> warnings;
  const CaseDocument doc = parse_matpower_subset(testing::read_file(testing::fixture_path("case4_mini.m")), &warnings);
  const NetworkData& d = doc.network;
  CHECK(d.base_mva == 100.0);
  REQUIRE(d.buses.size() == 4);
  CHECK(d.buses[0].kind == BusKind::Slack);
  CHECK(d.buses[3].kind == BusKind::PV);
  CHECK(d.loads.size() == 4);
  CHECK(d.generators.size() == 2);
  REQUIRE(d.branches.size() == 4);
  // 0.01008 pu on a 529 ohm base.
  CHECK(d.branches[0].r_ohm == doctest::Approx(0.01008 * 529.0));
  CHECK(d.branches[2].s_max_mva == 9999.0);
  bool gencost = false;
  for (const auto& w : warnings) gencost |= w.find("gencost") != std::string::npos;
  CHECK(gencost);

  SUBCASE("unsupported statements are reported with their line") {
    try {
      parse_matpower_subset("function mpc = x\nmpc.baseMVA = 100;\nfor k = 1:3\n");
      FAIL("accepted a loop");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnsupportedConstruct);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("missing blocks") {
    try {
      parse_matpower_subset("mpc.baseMVA = 100;\n");
      FAIL("accepted an empty case");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SchemaError);
    }
  }
}

TEST_CASE("parsers never escape with anything but a structured error") {
  const std::string seeds[] = {tie_text(), testing::read_file(testing::fixture_path("case4_mini.m"))};
  std::mt19937_64 rng(99);
  int structured = 0;
  for (int i = 0; i < 600; ++i) {
    std::string text = seeds[i % 2];
    const int edits = 1 + static_cast<int>(rng() % 8);
    for (int e = 0; e < edits && !text.empty(); ++e) {
      const std::size_t at = rng() % text.size();
      switch (rng() % 3) {
        case 0: text[at] = static_cast<char>(rng() % 256); break;
        case 1: text.erase(at, 1 + rng() % 16); break;
        default: text.insert(at, 1, "{}[]\",:;0-.e\n"[rng() % 13]); break;
      }
    }
    try {
      if (i % 2 == 0) {
        parse_case_json(text);
      } else {
        parse_matpower_subset(text);
      }
    } catch (const Error&) {
      ++structured;
    } catch (const std::exception& e) {
      FAIL("unstructured exception: " << e.what());
    }
  }
  CHECK(structured > 0);
}
