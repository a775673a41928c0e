#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gridagent/model.h"

namespace gridagent {

/// Bus admittance matrix Y = G + jB over one island, in per-unit on the
/// network base.
struct AdmittanceMatrix {
  std::vector<std::string> bus_ids;  // matrix index -> bus id
  IdIndex index;                     // bus id -> matrix index
  Eigen::MatrixXcd y;

  Eigen::Index order() const { return y.rows(); }
};

/// Series admittance of a branch in per-unit, using its from-bus voltage base.
std::complex<double> series_admittance_pu(const Network& net, const Branch& br);

/// Total line-charging susceptance of a branch in per-unit.
double charging_susceptance_pu(const Network& net, const Branch& br);

/// Builds Y over the given island from the pi-model of every energizable
/// branch with both ends inside the island. Matrix order follows `island`.
AdmittanceMatrix build_admittance(const Network& net, const std::vector<std::string>& island);

}  // namespace gridagent
