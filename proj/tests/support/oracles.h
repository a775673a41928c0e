#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the solver or the analyzer under test; the
// Y-bus and injection formulas are re-derived from the raw payload.

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gridagent/actions.h"
#include "gridagent/model.h"
#include "gridagent/planner.h"
#include "gridagent/powerflow.h"
#include "gridagent/violations.h"

namespace gridagent::testing {

struct RandomNetworkOptions {
  int min_buses = 3;
  int max_buses = 8;
  int max_extra_edges = 2;
  double pv_probability = 0.25;
  bool with_controls = false;  // switches, curtailable loads, battery budget
};

/// Connected network on one voltage level: random spanning tree plus a few
/// chords. Loads are light enough for Gauss-Seidel to converge from flat.
NetworkData random_network_data(std::mt19937_64& rng, const RandomNetworkOptions& opts = {});

/// Y-bus straight from the payload (pi-model, ohms on the from-bus base), in
/// network bus order. Out-of-service branches and open switches are skipped.
Eigen::MatrixXcd reference_ybus(const NetworkData& data);

struct GaussSeidelResult {
  std::vector<std::complex<double>> v;  // network bus order
  int iterations = 0;
  bool converged = false;
};

/// Plain Gauss-Seidel fixed point for a single connected island: slack fixed,
/// PV magnitudes re-imposed each sweep, no reactive limits.
GaussSeidelResult gauss_seidel(const NetworkData& data, double tolerance = 1e-10, int max_iterations = 2'000'000);

/// P_i, Q_i = sum_j |V_i||V_j|(G cos + B sin), (G sin - B cos).
void polar_injections(const Eigen::MatrixXcd& y, const Eigen::VectorXd& vm, const Eigen::VectorXd& va,
                      Eigen::VectorXd& p, Eigen::VectorXd& q);

/// Central differences of polar_injections in the Newton variable layout.
Eigen::MatrixXd finite_difference_jacobian(const Eigen::MatrixXcd& y, const Eigen::VectorXd& vm,
                                           const Eigen::VectorXd& va, const std::vector<int>& angle_buses,
                                           const std::vector<int>& magnitude_buses, double h = 1e-6);

/// Element-by-element scan that recomputes loading from s_mva / i_ka.
std::vector<Violation> brute_force_scan(const Network& net, const PowerFlowSolution& sol);

/// Same (kind, element) set with severities equal to 1e-12; order ignored.
bool same_violations(std::vector<Violation> a, std::vector<Violation> b);

/// A structurally valid, converged solution with random voltages, flows and
/// energization, tagged with the network's fingerprint.
PowerFlowSolution random_solution(const Network& net, std::mt19937_64& rng);

/// A random action against the current state. Roughly a fifth are invalid
/// (out-of-range gamma, unknown ids, over-capability dispatch).
Action random_action(const Network& net, std::mt19937_64& rng);
std::vector<Action> random_plan(const Network& net, std::mt19937_64& rng, int max_len = 10);

/// Planner that always returns the single action (switch toggle, or a
/// battery drawing full power) that worsens the report the most.
class AdversarialPlanner : public Planner {
 public:
  std::string id() const override { return "adversarial"; }
  Plan plan(const PlanRequest& req) override;
};

/// Replays canned assistant replies in order and records every request.
struct FixtureTransport {
  std::vector<std::string> replies;
  std::vector<ChatRequest> requests;
  std::size_t next = 0;

  ChatTransport transport();
};

std::string read_file(const std::string& path);
std::string fixture_path(const std::string& name);
std::string data_path(const std::string& name);

/// The crafted two-feeder case with one open tie switch.
Network tie_switch_network();

}  // namespace gridagent::testing
