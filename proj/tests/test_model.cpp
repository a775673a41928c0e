#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.h"

#include "gridagent/admittance.h"
#include "gridagent/case_io.h"
#include "gridagent/error.h"
#include "gridagent/model.h"
#include "gridagent/powerflow.h"
#include "gridagent/topology.h"

using namespace gridagent;

namespace {

NetworkData two_bus() {
  NetworkData d;
  d.base_mva = 10.0;
  d.buses = {{"1", "", 11.0, BusKind::Slack}, {"2", "", 11.0, BusKind::PQ}};
  d.branches = {{"L1", "1", "2", 0.5, 0.8, 0.0, 5.0, 0.3}};
  d.generators = {{"G1", "1", 0.0, 1.0, -10.0, 10.0}};
  d.loads = {{"D1", "2", 1.0, 0.3}};
  return d;
}

ErrorCode code_of(NetworkData d) {
  try {
    build_network(std::move(d));
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("build_network accepted an invalid payload");
  return ErrorCode::InvalidNetwork;
}

}  // namespace

TEST_CASE("build_network rejects broken payloads") {
  SUBCASE("duplicate bus") {
    auto d = two_bus();
    d.buses[1].id = "1";
    d.branches.clear();
    d.loads.clear();
    CHECK(code_of(d) == ErrorCode::DuplicateId);
  }
  SUBCASE("dangling branch end") {
    auto d = two_bus();
    d.branches[0].to_bus = "9";
    CHECK(code_of(d) == ErrorCode::DanglingReference);
  }
  SUBCASE("no slack") {
    auto d = two_bus();
    d.buses[0].kind = BusKind::PV;
    CHECK(code_of(d) == ErrorCode::NoSlack);
  }
  SUBCASE("two slacks") {
    auto d = two_bus();
    d.buses[1].kind = BusKind::Slack;
    CHECK(code_of(d) == ErrorCode::MultipleSlack);
  }
  SUBCASE("zero impedance") {
    auto d = two_bus();
    d.branches[0].r_ohm = d.branches[0].x_ohm = 0.0;
    CHECK(code_of(d) == ErrorCode::ZeroImpedanceBranch);
  }
  SUBCASE("switch on a fixed branch") {
    auto d = two_bus();
    d.switches = {{"S1", "L1", true}};
    CHECK(code_of(d) == ErrorCode::InvalidNetwork);
  }
  SUBCASE("gamma above gamma_max") {
    auto d = two_bus();
    d.loads[0].curtailable = true;
    d.loads[0].gamma = 0.6;
    CHECK(code_of(d) == ErrorCode::InvalidNetwork);
  }
  SUBCASE("batteries over budget") {
    auto d = two_bus();
    d.batteries = {{"BAT1", "2", true, 0.0, 0.0, 1.0, 1.0, 1.0}};
    CHECK(code_of(d) == ErrorCode::InvalidNetwork);
  }
}

TEST_CASE("lookups throw typed errors") {
  const Network net = build_network(two_bus());
  CHECK(net.bus("2").kind == BusKind::PQ);
  CHECK_THROWS_AS(net.bus("7"), Error);
  try {
    net.branch("nope");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownBranch);
  }
  CHECK(net.slack_bus().id == "1");
}

TEST_CASE("per-unit conversions round trip") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1e-4, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double ohm = u(rng), kv = u(rng), base = u(rng);
    const double back = per_unit::pu_to_ohm(per_unit::ohm_to_pu(ohm, kv, base), kv, base);
    CHECK(std::abs(back - ohm) <= 1e-12 * ohm);
    const double s = u(rng) * 1e-6;
    CHECK(std::abs(per_unit::pu_to_siemens(per_unit::siemens_to_pu(s, kv, base), kv, base) - s) <= 1e-12 * s);
  }
  // 11 kV on 10 MVA: 12.1 ohm base.
  CHECK(per_unit::impedance_base_ohm(11.0, 10.0) == doctest::Approx(12.1));
  CHECK(per_unit::current_base_ka(11.0, 10.0) == doctest::Approx(0.524864).epsilon(1e-5));
}

TEST_CASE("toggling a switch twice is an involution") {
  for (const auto& name : builtin_names()) {
    Network net = builtin_network(name);
    const std::string before = serialize_network(net);
    const auto fp = network_fingerprint(net);
    for (const auto& s : std::vector<Switch>(net.switches())) {
      net.set_switch_closed(s.id, !s.closed);
      CHECK(network_fingerprint(net) != fp);
      net.set_switch_closed(s.id, s.closed);
    }
    CHECK(serialize_network(net) == before);
    CHECK(network_fingerprint(net) == fp);
  }
}

TEST_CASE("battery ids") {
  CHECK(next_battery_id(std::vector<std::string>{}) == "BAT1");
  CHECK(next_battery_id(std::vector<std::string>{"BAT1", "BAT3"}) == "BAT2");
}

TEST_CASE("admittance matches the hand-built reference and is permutation consistent") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const NetworkData d = testing::random_network_data(rng);
    const Network net = build_network(d);
    std::vector<std::string> order;
    for (const auto& b : net.buses()) order.push_back(b.id);
    const AdmittanceMatrix y = build_admittance(net, order);
    const Eigen::MatrixXcd ref = testing::reference_ybus(d);
    CHECK((y.y - ref).cwiseAbs().maxCoeff() <= 1e-9 * ref.cwiseAbs().maxCoeff());

    std::vector<std::size_t> perm(order.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::string> shuffled;
    for (auto p : perm) shuffled.push_back(order[p]);
    const AdmittanceMatrix yp = build_admittance(net, shuffled);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      for (std::size_t j = 0; j < perm.size(); ++j) {
        CHECK(yp.y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
              y.y(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j])));
      }
    }
  }
}

TEST_CASE("islands follow switch state; only the slack island is energized") {
  const Network net = testing::tie_switch_network();
  auto islands = find_islands(net);
  REQUIRE(islands.size() == 1);
  CHECK(islands[0].energized);

  Network cut = net;
  cut.set_switch_closed("S1", false);  // feeder B loses its supply
  islands = find_islands(cut);
  REQUIRE(islands.size() == 2);
  CHECK(islands[0].energized);
  CHECK_FALSE(islands[1].energized);
  CHECK(islands[1].bus_ids == std::vector<std::string>{"6", "7"});

  const auto tree = topology::feed_tree(net);
  CHECK(tree.depth[*net.bus_index("5")] == 4);
  const auto sub = topology::subtree(tree, *net.bus_index("3"));
  CHECK(sub.size() == 3);
  const auto d = topology::hop_distances(topology::physical_adjacency(net), {*net.bus_index("5")});
  CHECK(d[*net.bus_index("7")] == 1);  // through the open tie
  const auto live = topology::hop_distances(topology::active_adjacency(net), {*net.bus_index("5")});
  CHECK(live[*net.bus_index("7")] == 6);
}
