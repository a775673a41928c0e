#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "gridagent/kernels.h"
#include "gridagent/model.h"

namespace gridagent {

struct Island {
  std::vector<std::string> bus_ids;  // in network bus order
  bool energized = false;
};

/// Connected components under effective branch states. Only the component
/// holding the slack bus is energized. Out-of-service buses belong to no island.
std::vector<Island> find_islands(const Network& net);

struct BusResult {
  std::string id;
  bool energized = false;
  double v_pu = 0.0;  // 0 marks a de-energized bus
  double theta_rad = 0.0;
  double p_injection_mw = 0.0;  // net injection computed from the solved voltages
  double q_injection_mvar = 0.0;
};

struct BranchFlow {
  std::string id;
  bool active = false;
  double p_from_mw = 0.0;
  double q_from_mvar = 0.0;
  double p_to_mw = 0.0;
  double q_to_mvar = 0.0;
  double s_mva = 0.0;  // from-end apparent power
  double i_ka = 0.0;   // from-end current
  double loading_percent = 0.0;
};

struct PowerFlowSolution {
  std::vector<BusResult> buses;       // aligned with Network::buses()
  std::vector<BranchFlow> branches;   // aligned with Network::branches()
  std::vector<Island> islands;
  bool converged = false;
  int iterations = 0;
  double max_mismatch_pu = 0.0;
  int q_limit_switches = 0;  // PV buses converted to PQ at a reactive limit
  std::uint64_t network_fingerprint = 0;

  /// Complex per-unit voltages aligned with Network::buses().
  std::vector<std::complex<double>> voltages() const;
};

struct SolveOptions {
  double tolerance_pu = 1e-8;
  int max_iterations = 50;
  bool flat_start = true;
  bool enforce_q_limits = true;
  kernels::Execution execution = kernels::Execution::Parallel;
  /// Initial guess when flat_start is false; buses missing from it start flat.
  const PowerFlowSolution* warm_start = nullptr;
};

/// Newton-Raphson AC power flow over the energized island.
///
/// Throws NoSlackInIsland when the slack bus is out of service and
/// SingularJacobian when a Newton step cannot be computed. Exhausting
/// max_iterations is not an error: the solution comes back with
/// converged == false.
PowerFlowSolution solve(const Network& net, const SolveOptions& opts = {});

/// Pi-model branch flows for voltages aligned with Network::buses().
std::vector<BranchFlow> branch_flows(const Network& net, const std::vector<std::complex<double>>& voltages);

/// Scheduled net injections (generation + battery - effective load) per bus
/// in per-unit, aligned with Network::buses(). Slack and PV reactive entries
/// hold only the non-generator part.
struct ScheduledInjections {
  std::vector<double> p_pu;
  std::vector<double> q_pu;
};
ScheduledInjections scheduled_injections(const Network& net);

}  // namespace gridagent
