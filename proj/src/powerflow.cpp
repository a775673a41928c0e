#include "gridagent/powerflow.h"

#include <algorithm>
#include <cmath>

#include "gridagent/admittance.h"
#include "gridagent/error.h"
#include "gridagent/topology.h"

namespace gridagent {

std::vector<std::complex<double>> PowerFlowSolution::voltages() const {
  std::vector<std::complex<double>> v(buses.size());
  for (std::size_t i = 0; i < buses.size(); ++i) {
    v[i] = buses[i].energized ? std::polar(buses[i].v_pu, buses[i].theta_rad) : std::complex<double>{};
  }
  return v;
}

std::vector<Island> find_islands(const Network& net) {
  const auto adj = topology::active_adjacency(net);
  const auto comps = topology::connected_components(net, adj);
  const auto slack = *net.bus_index(net.slack_bus().id);
  std::vector<Island> out;
  out.reserve(comps.size());
  for (const auto& comp : comps) {
    Island isl;
    for (auto b : comp) {
      isl.bus_ids.push_back(net.buses()[b].id);
      if (b == slack) isl.energized = true;
    }
    out.push_back(std::move(isl));
  }
  return out;
}

ScheduledInjections scheduled_injections(const Network& net) {
  const auto n = net.buses().size();
  ScheduledInjections s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  const double base = net.base_mva();
  for (const auto& g : net.generators()) s.p_pu[*net.bus_index(g.bus_id)] += g.p_mw / base;
  for (const auto& l : net.loads()) {
    const auto i = *net.bus_index(l.bus_id);
    s.p_pu[i] -= l.effective_p_mw() / base;
    s.q_pu[i] -= l.effective_q_mvar() / base;
  }
  for (const auto& b : net.batteries()) {
    if (!b.placed) continue;
    const auto i = *net.bus_index(b.bus_id);
    s.p_pu[i] += b.p_mw / base;
    s.q_pu[i] += b.q_mvar / base;
  }
  return s;
}

std::vector<BranchFlow> branch_flows(const Network& net, const std::vector<std::complex<double>>& voltages) {
  const double base = net.base_mva();
  std::vector<BranchFlow> flows;
  flows.reserve(net.branches().size());
  for (const Branch& br : net.branches()) {
    BranchFlow f;
    f.id = br.id;
    const auto fi = *net.bus_index(br.from_bus);
    const auto ti = *net.bus_index(br.to_bus);
    const auto vf = voltages.at(fi);
    const auto vt = voltages.at(ti);
    f.active = effective_branch_state(net, br.id) && std::abs(vf) > 0.0 && std::abs(vt) > 0.0;
    if (f.active) {
      const auto ys = series_admittance_pu(net, br);
      const std::complex<double> half_shunt(0.0, 0.5 * charging_susceptance_pu(net, br));
      const auto i_from = (vf - vt) * ys + vf * half_shunt;
      const auto i_to = (vt - vf) * ys + vt * half_shunt;
      const auto s_from = vf * std::conj(i_from);
      const auto s_to = vt * std::conj(i_to);
      f.p_from_mw = s_from.real() * base;
      f.q_from_mvar = s_from.imag() * base;
      f.p_to_mw = s_to.real() * base;
      f.q_to_mvar = s_to.imag() * base;
      f.s_mva = std::abs(s_from) * base;
      f.i_ka = std::abs(i_from) * per_unit::current_base_ka(net.bus(br.from_bus).nominal_kv, base);
      f.loading_percent = 100.0 * std::max(f.s_mva / br.s_max_mva, f.i_ka / br.i_max_ka);
    }
    flows.push_back(std::move(f));
  }
  return flows;
}

namespace {

enum class LocalKind { Slack, PV, PQ };

struct NewtonState {
  Eigen::MatrixXcd y;
  std::vector<LocalKind> kind;
  Eigen::VectorXd p_sched;
  Eigen::VectorXd q_sched;
  Eigen::VectorXd vm;
  Eigen::VectorXd va;
};

struct NewtonOutcome {
  bool converged = false;
  int iterations = 0;
  double max_mismatch = 0.0;
};

double mismatch(const NewtonState& st, const std::vector<int>& angle_buses, const std::vector<int>& mag_buses,
                const Eigen::VectorXd& p, const Eigen::VectorXd& q, Eigen::VectorXd& rhs) {
  const auto na = static_cast<Eigen::Index>(angle_buses.size());
  rhs.resize(na + static_cast<Eigen::Index>(mag_buses.size()));
  double worst = 0.0;
  for (Eigen::Index r = 0; r < rhs.size(); ++r) {
    const bool q_row = r >= na;
    const int b = q_row ? mag_buses[static_cast<std::size_t>(r - na)] : angle_buses[static_cast<std::size_t>(r)];
    rhs(r) = q_row ? st.q_sched(b) - q(b) : st.p_sched(b) - p(b);
    worst = std::max(worst, std::abs(rhs(r)));
  }
  return worst;
}

NewtonOutcome newton(NewtonState& st, const SolveOptions& opts) {
  std::vector<int> angle_buses;
  std::vector<int> mag_buses;
  for (int i = 0; i < static_cast<int>(st.kind.size()); ++i) {
    if (st.kind[static_cast<std::size_t>(i)] != LocalKind::Slack) angle_buses.push_back(i);
  }
  for (int i = 0; i < static_cast<int>(st.kind.size()); ++i) {
    if (st.kind[static_cast<std::size_t>(i)] == LocalKind::PQ) mag_buses.push_back(i);
  }

  NewtonOutcome out;
  Eigen::VectorXd p;
  Eigen::VectorXd q;
  Eigen::VectorXd rhs;
  Eigen::MatrixXd jac;
  for (;;) {
    const Eigen::VectorXcd v = kernels::polar_voltages(st.vm, st.va);
    kernels::power_injections(opts.execution, st.y, v, p, q);
    out.max_mismatch = mismatch(st, angle_buses, mag_buses, p, q, rhs);
    if (!std::isfinite(out.max_mismatch)) return out;
    if (out.max_mismatch <= opts.tolerance_pu) {
      out.converged = true;
      return out;
    }
    if (out.iterations >= opts.max_iterations) return out;

    kernels::jacobian(opts.execution, st.y, v, angle_buses, mag_buses, jac);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    const Eigen::VectorXd dx = lu.solve(rhs);
    if (!dx.allFinite() || !(lu.rcond() > 1e-14)) {
      throw Error(ErrorCode::SingularJacobian, "Newton step failed: Jacobian is singular");
    }
    const auto na = static_cast<Eigen::Index>(angle_buses.size());
    for (Eigen::Index c = 0; c < na; ++c) st.va(angle_buses[static_cast<std::size_t>(c)]) += dx(c);
    for (std::size_t c = 0; c < mag_buses.size(); ++c) st.vm(mag_buses[c]) += dx(na + static_cast<Eigen::Index>(c));
    ++out.iterations;
    if (st.vm.minCoeff() <= 0.0 || st.vm.maxCoeff() > 10.0) {
      // Voltage collapse: report the diverged iterate.
      const Eigen::VectorXcd vv = kernels::polar_voltages(st.vm, st.va);
      kernels::power_injections(opts.execution, st.y, vv, p, q);
      out.max_mismatch = mismatch(st, angle_buses, mag_buses, p, q, rhs);
      return out;
    }
  }
}

}  // namespace

PowerFlowSolution solve(const Network& net, const SolveOptions& opts) {
  PowerFlowSolution sol;
  sol.network_fingerprint = network_fingerprint(net);
  sol.islands = find_islands(net);

  const Bus& slack = net.slack_bus();
  const auto slack_index = *net.bus_index(slack.id);
  if (!slack.in_service) throw Error(ErrorCode::NoSlackInIsland, "slack bus '" + slack.id + "' is out of service");

  std::vector<std::string> island;
  for (const auto& isl : sol.islands) {
    if (isl.energized) island = isl.bus_ids;
  }
  if (island.empty()) throw Error(ErrorCode::NoSlackInIsland, "no island contains the slack bus");

  const double base = net.base_mva();
  const auto sched = scheduled_injections(net);
  const auto n = static_cast<Eigen::Index>(island.size());

  NewtonState st;
  const AdmittanceMatrix ybus = build_admittance(net, island);
  st.y = ybus.y;
  st.kind.assign(static_cast<std::size_t>(n), LocalKind::PQ);
  st.p_sched.resize(n);
  st.q_sched.resize(n);
  st.vm = Eigen::VectorXd::Ones(n);
  st.va = Eigen::VectorXd::Zero(n);

  std::vector<std::size_t> global(static_cast<std::size_t>(n));
  std::vector<double> q_min(static_cast<std::size_t>(n), 0.0);
  std::vector<double> q_max(static_cast<std::size_t>(n), 0.0);
  std::vector<bool> has_gen(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) global[static_cast<std::size_t>(i)] = *net.bus_index(island[static_cast<std::size_t>(i)]);
  for (const auto& g : net.generators()) {
    auto it = ybus.index.find(g.bus_id);
    if (it == ybus.index.end()) continue;
    const auto i = it->second;
    if (!has_gen[i]) st.vm(static_cast<Eigen::Index>(i)) = g.v_set_pu;
    has_gen[i] = true;
    q_min[i] += g.q_min_mvar;
    q_max[i] += g.q_max_mvar;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto gi = global[static_cast<std::size_t>(i)];
    const Bus& b = net.buses()[gi];
    auto& kind = st.kind[static_cast<std::size_t>(i)];
    if (gi == slack_index) {
      kind = LocalKind::Slack;
    } else if (b.kind == BusKind::PV && has_gen[static_cast<std::size_t>(i)]) {
      kind = LocalKind::PV;
    }
    st.p_sched(i) = sched.p_pu[gi];
    st.q_sched(i) = sched.q_pu[gi];
  }

  if (!opts.flat_start && opts.warm_start != nullptr) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto gi = global[static_cast<std::size_t>(i)];
      if (gi >= opts.warm_start->buses.size()) continue;
      const auto& prior = opts.warm_start->buses[gi];
      if (!prior.energized || !(prior.v_pu > 0.0)) continue;
      if (st.kind[static_cast<std::size_t>(i)] == LocalKind::PQ) st.vm(i) = prior.v_pu;
      if (st.kind[static_cast<std::size_t>(i)] != LocalKind::Slack) st.va(i) = prior.theta_rad;
    }
  }

  NewtonOutcome outcome = newton(st, opts);
  sol.iterations = outcome.iterations;

  if (outcome.converged && opts.enforce_q_limits) {
    const auto pv_count = std::count(st.kind.begin(), st.kind.end(), LocalKind::PV);
    for (std::ptrdiff_t round = 0; round < pv_count && outcome.converged; ++round) {
      Eigen::VectorXd p;
      Eigen::VectorXd q;
      kernels::power_injections(opts.execution, st.y, kernels::polar_voltages(st.vm, st.va), p, q);
      bool switched = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto li = static_cast<std::size_t>(i);
        if (st.kind[li] != LocalKind::PV) continue;
        // Generator output = computed injection minus the non-generator part.
        const double q_gen = (q(i) - st.q_sched(i)) * base;
        double limit = 0.0;
        if (q_gen > q_max[li] + 1e-9) {
          limit = q_max[li];
        } else if (q_gen < q_min[li] - 1e-9) {
          limit = q_min[li];
        } else {
          continue;
        }
        st.kind[li] = LocalKind::PQ;
        st.q_sched(i) += limit / base;
        ++sol.q_limit_switches;
        switched = true;
      }
      if (!switched) break;
      outcome = newton(st, opts);
      sol.iterations += outcome.iterations;
    }
  }

  sol.converged = outcome.converged;
  sol.max_mismatch_pu = outcome.max_mismatch;

  sol.buses.resize(net.buses().size());
  for (std::size_t i = 0; i < net.buses().size(); ++i) sol.buses[i].id = net.buses()[i].id;
  Eigen::VectorXd p;
  Eigen::VectorXd q;
  kernels::power_injections(opts.execution, st.y, kernels::polar_voltages(st.vm, st.va), p, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& r = sol.buses[global[static_cast<std::size_t>(i)]];
    r.energized = true;
    r.v_pu = st.vm(i);
    r.theta_rad = st.va(i);
    r.p_injection_mw = p(i) * base;
    r.q_injection_mvar = q(i) * base;
  }
  sol.branches = branch_flows(net, sol.voltages());
  return sol;
}

}  // namespace gridagent
