#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.h"

#include "gridagent/admittance.h"
#include "gridagent/case_io.h"
#include "gridagent/error.h"
#include "gridagent/kernels.h"
#include "gridagent/powerflow.h"

using namespace gridagent;

namespace {

NetworkData two_bus(double p_mw, double q_mvar, double r, double x) {
  NetworkData d;
  d.base_mva = 10.0;
  d.buses = {{"1", "", 11.0, BusKind::Slack}, {"2", "", 11.0, BusKind::PQ}};
  d.branches = {{"L1", "1", "2", r, x, 0.0, 5.0, 0.3}};
  d.generators = {{"G1", "1", 0.0, 1.0, -10.0, 10.0}};
  if (p_mw != 0.0 || q_mvar != 0.0) d.loads = {{"D1", "2", p_mw, q_mvar}};
  return d;
}

std::vector<int> non_slack(const NetworkData& d, bool pq_only) {
  std::vector<int> out;
  for (std::size_t i = 0; i < d.buses.size(); ++i) {
    const auto k = d.buses[i].kind;
    if (k == BusKind::Slack) continue;
    if (pq_only && k != BusKind::PQ) continue;
    out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace

TEST_CASE("two-bus feeder matches the closed-form receiving voltage") {
  // |V|^4 + (2(PR + QX) - 1)|V|^2 + (P^2 + Q^2)(R^2 + X^2) = 0, upper root.
  const double p_mw = 2.0, q_mvar = 0.8, r = 0.9, x = 1.3;
  const Network net = build_network(two_bus(p_mw, q_mvar, r, x));
  const PowerFlowSolution sol = solve(net);
  REQUIRE(sol.converged);
  const double zb = 12.1, P = p_mw / 10.0, Q = q_mvar / 10.0, R = r / zb, X = x / zb;
  const double b = 2.0 * (P * R + Q * X) - 1.0;
  const double c = (P * P + Q * Q) * (R * R + X * X);
  const double v = std::sqrt((-b + std::sqrt(b * b - 4.0 * c)) / 2.0);
  CHECK(sol.buses[1].v_pu == doctest::Approx(v).epsilon(1e-9));
  CHECK(sol.buses[0].theta_rad == 0.0);
  // Receiving end draws exactly the load.
  CHECK(sol.branches[0].p_to_mw == doctest::Approx(-p_mw).epsilon(1e-7));
  CHECK(sol.branches[0].q_to_mvar == doctest::Approx(-q_mvar).epsilon(1e-7));
}

TEST_CASE("four-bus textbook example") {
  const Network net = network_from_case(parse_matpower_subset(testing::read_file(testing::fixture_path("case4_mini.m"))));
  // The published solution leaves the bus-4 unit above its nominal Qmax.
  const PowerFlowSolution sol = solve(net, {.enforce_q_limits = false});
  REQUIRE(sol.converged);
  const double deg = 180.0 / std::numbers::pi;
  // Published three-decimal results.
  CHECK(sol.buses[1].v_pu == doctest::Approx(0.982).epsilon(6e-4));
  CHECK(sol.buses[2].v_pu == doctest::Approx(0.969).epsilon(6e-4));
  CHECK(sol.buses[3].v_pu == doctest::Approx(1.020).epsilon(1e-9));
  CHECK(sol.buses[1].theta_rad * deg == doctest::Approx(-0.976).epsilon(2e-3));
  CHECK(sol.buses[2].theta_rad * deg == doctest::Approx(-1.872).epsilon(2e-3));
  CHECK(sol.buses[3].theta_rad * deg == doctest::Approx(1.523).epsilon(2e-3));
}

TEST_CASE("Newton-Raphson agrees with Gauss-Seidel on random networks") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const NetworkData d = testing::random_network_data(rng);
    const PowerFlowSolution nr = solve(build_network(d), {.enforce_q_limits = false});
    const auto gs = testing::gauss_seidel(d);
    REQUIRE(nr.converged);
    REQUIRE(gs.converged);
    for (std::size_t i = 0; i < d.buses.size(); ++i) {
      CHECK(std::abs(nr.buses[i].v_pu - std::abs(gs.v[i])) <= 1e-6);
      CHECK(std::abs(nr.buses[i].theta_rad - std::arg(gs.v[i])) <= 1e-6);
    }
  }
}

TEST_CASE("analytic Jacobian matches central differences; parallel kernels match serial bit for bit") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> vm_u(0.9, 1.1), va_u(-0.3, 0.3);
  for (int trial = 0; trial < 40; ++trial) {
    const NetworkData d = testing::random_network_data(rng);
    const Eigen::MatrixXcd y = testing::reference_ybus(d);
    const auto n = y.rows();
    Eigen::VectorXd vm(n), va(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      vm(i) = vm_u(rng);
      va(i) = i == 0 ? 0.0 : va_u(rng);
    }
    const auto angle = non_slack(d, false);
    const auto mag = non_slack(d, true);
    Eigen::MatrixXd js, jp;
    const Eigen::VectorXcd v = kernels::polar_voltages(vm, va);
    kernels::jacobian_serial(y, v, angle, mag, js);
    kernels::jacobian_parallel(y, v, angle, mag, jp);
    CHECK(js == jp);
    const Eigen::MatrixXd fd = testing::finite_difference_jacobian(y, vm, va, angle, mag);
    CHECK((js - fd).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, js.cwiseAbs().maxCoeff()));

    Eigen::VectorXd ps, qs, pp, qp, pr, qr;
    kernels::power_injections_serial(y, v, ps, qs);
    kernels::power_injections_parallel(y, v, pp, qp);
    CHECK(ps == pp);
    CHECK(qs == qp);
    testing::polar_injections(y, vm, va, pr, qr);
    CHECK((ps - pr).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((qs - qr).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("solutions satisfy the mismatch equations and conserve power") {
  std::vector<NetworkData> cases;
  for (const auto& name : builtin_names()) cases.push_back(builtin_case(name).network);
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20; ++i) cases.push_back(testing::random_network_data(rng));

  for (const NetworkData& d : cases) {
    const Network net = build_network(d);
    const SolveOptions opts{.enforce_q_limits = false};
    const PowerFlowSolution sol = solve(net, opts);
    REQUIRE(sol.converged);
    CHECK(sol.max_mismatch_pu <= opts.tolerance_pu);

    const Eigen::MatrixXcd y = testing::reference_ybus(d);
    const auto n = y.rows();
    Eigen::VectorXd vm(n), va(n), p, q;
    for (Eigen::Index i = 0; i < n; ++i) {
      vm(i) = sol.buses[static_cast<std::size_t>(i)].v_pu;
      va(i) = sol.buses[static_cast<std::size_t>(i)].theta_rad;
    }
    testing::polar_injections(y, vm, va, p, q);
    std::vector<double> p_sched(static_cast<std::size_t>(n), 0.0), q_sched(static_cast<std::size_t>(n), 0.0);
    for (const auto& l : d.loads) {
      const auto i = *net.bus_index(l.bus_id);
      p_sched[i] -= l.effective_p_mw() / d.base_mva;
      q_sched[i] -= l.effective_q_mvar() / d.base_mva;
    }
    for (const auto& g : d.generators) p_sched[*net.bus_index(g.bus_id)] += g.p_mw / d.base_mva;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = d.buses[static_cast<std::size_t>(i)].kind;
      if (k == BusKind::Slack) continue;
      CHECK(std::abs(p(i) - p_sched[static_cast<std::size_t>(i)]) <= 1e-7);
      if (k == BusKind::PQ) CHECK(std::abs(q(i) - q_sched[static_cast<std::size_t>(i)]) <= 1e-7);
    }

    // Net bus injections equal the sum of branch losses.
    double inject = 0.0, losses = 0.0;
    for (const auto& b : sol.buses) inject += b.p_injection_mw;
    for (const auto& f : sol.branches) losses += f.p_from_mw + f.p_to_mw;
    CHECK(std::abs(inject - losses) <= 10.0 * opts.tolerance_pu * d.base_mva * static_cast<double>(n));
  }
}

TEST_CASE("builtins converge within ten iterations") {
  for (const auto& name : builtin_names()) {
    const PowerFlowSolution sol = solve(builtin_network(name));
    CAPTURE(name);
    CHECK(sol.converged);
    CHECK(sol.iterations <= 10);
  }
}

TEST_CASE("serial and parallel execution give identical solutions") {
  for (const auto& name : builtin_names()) {
    const Network net = builtin_network(name);
    const PowerFlowSolution a = solve(net, {.execution = kernels::Execution::Serial});
    const PowerFlowSolution b = solve(net, {.execution = kernels::Execution::Parallel});
    REQUIRE(a.buses.size() == b.buses.size());
    for (std::size_t i = 0; i < a.buses.size(); ++i) CHECK(a.buses[i].v_pu == b.buses[i].v_pu);
    CHECK(a.iterations == b.iterations);
  }
}

TEST_CASE("islands, charging current and failure modes") {
  SUBCASE("no-load line carries only charging current") {
    NetworkData d = two_bus(0.0, 0.0, 0.5, 0.8);
    d.branches[0].b_total_shunt_siemens = 1e-4;
    const PowerFlowSolution sol = solve(build_network(d));
    CHECK(sol.converged);
    CHECK(sol.branches[0].loading_percent > 0.0);
    CHECK(std::abs(sol.branches[0].p_from_mw) < 1e-6);
    CHECK(sol.buses[1].v_pu > 1.0);  // Ferranti rise
  }
  SUBCASE("de-energized buses report zero voltage") {
    Network net = testing::tie_switch_network();
    net.set_switch_closed("S1", false);
    const PowerFlowSolution sol = solve(net);
    CHECK(sol.converged);
    CHECK_FALSE(sol.buses[*net.bus_index("6")].energized);
    CHECK(sol.buses[*net.bus_index("6")].v_pu == 0.0);
    CHECK_FALSE(sol.branches[*net.branch_index(net.switch_("S1").branch_id)].active);
  }
  SUBCASE("slack out of service") {
    NetworkData d = two_bus(1.0, 0.2, 0.5, 0.8);
    d.buses[0].in_service = false;
    try {
      solve(build_network(d));
      FAIL("solved without a slack");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoSlackInIsland);
    }
  }
  SUBCASE("iteration cap is reported, not thrown") {
    const PowerFlowSolution sol = solve(builtin_network("ieee69"), {.max_iterations = 1});
    CHECK_FALSE(sol.converged);
  }
  SUBCASE("reactive limits convert PV buses") {
    NetworkData d = two_bus(2.0, 1.5, 0.5, 0.8);
    d.buses[1].kind = BusKind::PV;
    d.generators.push_back({"G2", "2", 0.5, 1.03, -0.1, 0.1});
    const PowerFlowSolution sol = solve(build_network(d));
    CHECK(sol.converged);
    CHECK(sol.q_limit_switches == 1);
    CHECK(sol.buses[1].v_pu < 1.03);
  }
}
