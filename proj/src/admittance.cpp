#include "gridagent/admittance.h"

#include "gridagent/error.h"

namespace gridagent {

std::complex<double> series_admittance_pu(const Network& net, const Branch& br) {
  const double kv = net.bus(br.from_bus).nominal_kv;
  const double r = per_unit::ohm_to_pu(br.r_ohm, kv, net.base_mva());
  const double x = per_unit::ohm_to_pu(br.x_ohm, kv, net.base_mva());
  if (r == 0.0 && x == 0.0) {
    throw Error(ErrorCode::ZeroImpedanceBranch, "branch '" + br.id + "' has zero impedance");
  }
  return 1.0 / std::complex<double>(r, x);
}

double charging_susceptance_pu(const Network& net, const Branch& br) {
  return per_unit::siemens_to_pu(br.b_total_shunt_siemens, net.bus(br.from_bus).nominal_kv, net.base_mva());
}

AdmittanceMatrix build_admittance(const Network& net, const std::vector<std::string>& island) {
  if (island.empty()) throw Error(ErrorCode::InvalidNetwork, "admittance island is empty");
  AdmittanceMatrix m;
  m.bus_ids = island;
  m.index.reserve(island.size());
  for (std::size_t i = 0; i < island.size(); ++i) {
    net.bus(island[i]);
    m.index.emplace(island[i], i);
  }
  const auto n = static_cast<Eigen::Index>(island.size());
  m.y = Eigen::MatrixXcd::Zero(n, n);

  for (const Branch& br : net.branches()) {
    if (!effective_branch_state(net, br.id)) continue;
    auto fi = m.index.find(br.from_bus);
    auto ti = m.index.find(br.to_bus);
    if (fi == m.index.end() || ti == m.index.end()) continue;
    const auto f = static_cast<Eigen::Index>(fi->second);
    const auto t = static_cast<Eigen::Index>(ti->second);
    const std::complex<double> ys = series_admittance_pu(net, br);
    const std::complex<double> half_shunt(0.0, 0.5 * charging_susceptance_pu(net, br));
    m.y(f, f) += ys + half_shunt;
    m.y(t, t) += ys + half_shunt;
    m.y(f, t) -= ys;
    m.y(t, f) -= ys;
  }
  return m;
}

}  // namespace gridagent
