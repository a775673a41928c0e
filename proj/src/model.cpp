#include "gridagent/model.h"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "gridagent/error.h"
#include "gridagent/hash.h"

namespace gridagent {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::MultipleSlack: return "MultipleSlack";
    case ErrorCode::NoSlack: return "NoSlack";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvalidNetwork: return "InvalidNetwork";
    case ErrorCode::UnknownElement: return "UnknownElement";
    case ErrorCode::UnknownBranch: return "UnknownBranch";
    case ErrorCode::ZeroImpedanceBranch: return "ZeroImpedanceBranch";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::SemanticError: return "SemanticError";
    case ErrorCode::UnsupportedConstruct: return "UnsupportedConstruct";
    case ErrorCode::UnknownCase: return "UnknownCase";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::NoSlackInIsland: return "NoSlackInIsland";
    case ErrorCode::StaleSolution: return "StaleSolution";
    case ErrorCode::DivergedAnalysis: return "DivergedAnalysis";
    case ErrorCode::InvalidAction: return "InvalidAction";
    case ErrorCode::NoImprovingPlan: return "NoImprovingPlan";
    case ErrorCode::NoJsonFound: return "NoJsonFound";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::UnknownTool: return "UnknownTool";
    case ErrorCode::InvalidArguments: return "InvalidArguments";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::UnparseableAfterRepair: return "UnparseableAfterRepair";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    case ErrorCode::WriteError: return "WriteError";
  }
  return "Unknown";
}

std::string_view to_string(BusKind kind) {
  switch (kind) {
    case BusKind::Slack: return "slack";
    case BusKind::PV: return "pv";
    case BusKind::PQ: return "pq";
  }
  return "pq";
}

std::optional<BusKind> parse_bus_kind(std::string_view text) {
  if (text == "slack") return BusKind::Slack;
  if (text == "pv") return BusKind::PV;
  if (text == "pq") return BusKind::PQ;
  return std::nullopt;
}

namespace {

std::optional<std::size_t> lookup(const IdIndex& index, std::string_view id) {
  auto it = index.find(id);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

[[noreturn]] void unknown(std::string_view what, std::string_view id) {
  throw Error(ErrorCode::UnknownElement, std::string(what) + " '" + std::string(id) + "' not found");
}

template <typename T>
void index_ids(const std::vector<T>& items, IdIndex& index, std::string_view what) {
  index.clear();
  index.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!index.emplace(items[i].id, i).second) {
      throw Error(ErrorCode::DuplicateId, std::string(what) + " id '" + items[i].id + "' is duplicated");
    }
  }
}

bool finite(double v) { return std::isfinite(v); }

void require(bool ok, ErrorCode code, const std::string& message) {
  if (!ok) throw Error(code, message);
}

}  // namespace

void Network::reindex() {
  index_ids(data_.buses, bus_index_, "bus");
  index_ids(data_.branches, branch_index_, "branch");
  index_ids(data_.switches, switch_index_, "switch");
  index_ids(data_.loads, load_index_, "load");
  index_ids(data_.generators, generator_index_, "generator");
  index_ids(data_.batteries, battery_index_, "battery");
  branch_switch_.clear();
  for (std::size_t i = 0; i < data_.switches.size(); ++i) {
    if (!branch_switch_.emplace(data_.switches[i].branch_id, i).second) {
      throw Error(ErrorCode::InvalidNetwork, "branch '" + data_.switches[i].branch_id + "' has more than one switch");
    }
  }
}

int Network::placed_battery_count() const {
  return static_cast<int>(std::count_if(data_.batteries.begin(), data_.batteries.end(),
                                        [](const Battery& b) { return b.placed; }));
}

std::optional<std::size_t> Network::bus_index(std::string_view id) const { return lookup(bus_index_, id); }
std::optional<std::size_t> Network::branch_index(std::string_view id) const { return lookup(branch_index_, id); }
std::optional<std::size_t> Network::switch_index(std::string_view id) const { return lookup(switch_index_, id); }
std::optional<std::size_t> Network::load_index(std::string_view id) const { return lookup(load_index_, id); }
std::optional<std::size_t> Network::generator_index(std::string_view id) const {
  return lookup(generator_index_, id);
}
std::optional<std::size_t> Network::battery_index(std::string_view id) const { return lookup(battery_index_, id); }

const Bus& Network::bus(std::string_view id) const {
  auto i = bus_index(id);
  if (!i) unknown("bus", id);
  return data_.buses[*i];
}

const Branch& Network::branch(std::string_view id) const {
  auto i = branch_index(id);
  if (!i) throw Error(ErrorCode::UnknownBranch, "branch '" + std::string(id) + "' not found");
  return data_.branches[*i];
}

const Switch& Network::switch_(std::string_view id) const {
  auto i = switch_index(id);
  if (!i) unknown("switch", id);
  return data_.switches[*i];
}

const Load& Network::load(std::string_view id) const {
  auto i = load_index(id);
  if (!i) unknown("load", id);
  return data_.loads[*i];
}

const Battery& Network::battery(std::string_view id) const {
  auto i = battery_index(id);
  if (!i) unknown("battery", id);
  return data_.batteries[*i];
}

const Switch* Network::switch_for_branch(std::string_view branch_id) const {
  auto i = lookup(branch_switch_, branch_id);
  return i ? &data_.switches[*i] : nullptr;
}

const Bus& Network::slack_bus() const {
  for (const auto& b : data_.buses) {
    if (b.kind == BusKind::Slack) return b;
  }
  throw Error(ErrorCode::NoSlack, "network has no slack bus");
}

void Network::set_switch_closed(std::string_view switch_id, bool closed) {
  auto i = switch_index(switch_id);
  if (!i) unknown("switch", switch_id);
  data_.switches[*i].closed = closed;
}

void Network::set_load_gamma(std::string_view load_id, double gamma) {
  auto i = load_index(load_id);
  if (!i) unknown("load", load_id);
  data_.loads[*i].gamma = gamma;
}

void Network::set_battery(std::string_view battery_id, const Battery& battery) {
  auto i = battery_index(battery_id);
  if (!i) unknown("battery", battery_id);
  data_.batteries[*i] = battery;
  index_ids(data_.batteries, battery_index_, "battery");
}

void Network::insert_battery(std::size_t position, Battery battery) {
  position = std::min(position, data_.batteries.size());
  data_.batteries.insert(data_.batteries.begin() + static_cast<std::ptrdiff_t>(position), std::move(battery));
  index_ids(data_.batteries, battery_index_, "battery");
}

void Network::erase_battery(std::string_view battery_id) {
  auto i = battery_index(battery_id);
  if (!i) unknown("battery", battery_id);
  data_.batteries.erase(data_.batteries.begin() + static_cast<std::ptrdiff_t>(*i));
  index_ids(data_.batteries, battery_index_, "battery");
}

Network build_network(NetworkData data) {
  require(finite(data.base_mva) && data.base_mva > 0.0, ErrorCode::InvalidNetwork, "base_mva must be > 0");
  require(data.battery_budget >= 0, ErrorCode::InvalidNetwork, "battery_budget must be >= 0");

  Network net;
  net.data_ = std::move(data);
  net.reindex();
  const NetworkData& d = net.data_;

  int slack_count = 0;
  for (const auto& b : d.buses) {
    require(finite(b.nominal_kv) && b.nominal_kv > 0.0, ErrorCode::InvalidNetwork,
            "bus '" + b.id + "': nominal_kv must be > 0");
    require(finite(b.v_min_pu) && finite(b.v_max_pu) && b.v_min_pu > 0.0 && b.v_min_pu < b.v_max_pu,
            ErrorCode::InvalidNetwork, "bus '" + b.id + "': require 0 < v_min_pu < v_max_pu");
    if (b.kind == BusKind::Slack) ++slack_count;
  }
  require(slack_count > 0, ErrorCode::NoSlack, "network has no slack bus");
  require(slack_count == 1, ErrorCode::MultipleSlack, "network has " + std::to_string(slack_count) + " slack buses");

  auto bus_ref = [&](const std::string& owner, const std::string& bus_id) {
    require(net.bus_index(bus_id).has_value(), ErrorCode::DanglingReference,
            owner + " references unknown bus '" + bus_id + "'");
  };

  for (const auto& br : d.branches) {
    const std::string owner = "branch '" + br.id + "'";
    bus_ref(owner, br.from_bus);
    bus_ref(owner, br.to_bus);
    require(br.from_bus != br.to_bus, ErrorCode::InvalidNetwork, owner + " connects a bus to itself");
    require(finite(br.r_ohm) && finite(br.x_ohm) && br.r_ohm >= 0.0 && br.x_ohm >= 0.0, ErrorCode::InvalidNetwork,
            owner + ": impedance must be finite and >= 0");
    require(br.r_ohm * br.r_ohm + br.x_ohm * br.x_ohm > 0.0, ErrorCode::ZeroImpedanceBranch,
            owner + " has zero impedance");
    require(finite(br.b_total_shunt_siemens) && br.b_total_shunt_siemens >= 0.0, ErrorCode::InvalidNetwork,
            owner + ": line charging must be >= 0");
    require(finite(br.s_max_mva) && br.s_max_mva > 0.0 && finite(br.i_max_ka) && br.i_max_ka > 0.0,
            ErrorCode::InvalidNetwork, owner + ": ratings must be > 0");
  }

  for (const auto& sw : d.switches) {
    auto bi = net.branch_index(sw.branch_id);
    require(bi.has_value(), ErrorCode::DanglingReference,
            "switch '" + sw.id + "' references unknown branch '" + sw.branch_id + "'");
    require(d.branches[*bi].switchable, ErrorCode::InvalidNetwork,
            "switch '" + sw.id + "' is on non-switchable branch '" + sw.branch_id + "'");
  }

  for (const auto& ld : d.loads) {
    bus_ref("load '" + ld.id + "'", ld.bus_id);
    require(finite(ld.p_mw) && ld.p_mw >= 0.0 && finite(ld.q_mvar), ErrorCode::InvalidNetwork,
            "load '" + ld.id + "': p_mw must be >= 0");
    require(finite(ld.gamma_max) && ld.gamma_max >= 0.0 && ld.gamma_max <= 1.0, ErrorCode::InvalidNetwork,
            "load '" + ld.id + "': gamma_max must lie in [0, 1]");
    require(finite(ld.gamma) && ld.gamma >= 0.0 && ld.gamma <= ld.gamma_max, ErrorCode::InvalidNetwork,
            "load '" + ld.id + "': gamma must lie in [0, gamma_max]");
  }

  for (const auto& g : d.generators) {
    bus_ref("generator '" + g.id + "'", g.bus_id);
    const Bus& b = net.bus(g.bus_id);
    require(b.kind != BusKind::PQ, ErrorCode::InvalidNetwork,
            "generator '" + g.id + "' sits on PQ bus '" + g.bus_id + "'");
    require(finite(g.p_mw) && finite(g.v_set_pu) && g.v_set_pu > 0.0, ErrorCode::InvalidNetwork,
            "generator '" + g.id + "': v_set_pu must be > 0");
    require(finite(g.q_min_mvar) && finite(g.q_max_mvar) && g.q_min_mvar <= g.q_max_mvar, ErrorCode::InvalidNetwork,
            "generator '" + g.id + "': q_min_mvar must be <= q_max_mvar");
  }

  std::unordered_set<std::string> placed_buses;
  for (const auto& bat : d.batteries) {
    const std::string owner = "battery '" + bat.id + "'";
    bus_ref(owner, bat.bus_id);
    require(finite(bat.s_max_mva) && bat.s_max_mva > 0.0 && finite(bat.p_max_mw) && bat.p_max_mw >= 0.0 &&
                finite(bat.q_max_mvar) && bat.q_max_mvar >= 0.0,
            ErrorCode::InvalidNetwork, owner + ": capability must be positive");
    require(finite(bat.p_mw) && finite(bat.q_mvar), ErrorCode::InvalidNetwork, owner + ": dispatch must be finite");
    const double cap = bat.placed ? bat.s_max_mva : 0.0;
    require(bat.p_mw * bat.p_mw + bat.q_mvar * bat.q_mvar <= cap * cap * (1.0 + 1e-12), ErrorCode::InvalidNetwork,
            owner + ": dispatch exceeds apparent-power capability");
    require(std::abs(bat.p_mw) <= bat.p_max_mw * (1.0 + 1e-12) && std::abs(bat.q_mvar) <= bat.q_max_mvar * (1.0 + 1e-12),
            ErrorCode::InvalidNetwork, owner + ": dispatch exceeds P/Q limits");
    if (bat.placed) {
      require(placed_buses.insert(bat.bus_id).second, ErrorCode::InvalidNetwork,
              "bus '" + bat.bus_id + "' holds more than one placed battery");
    }
  }
  require(net.placed_battery_count() <= d.battery_budget, ErrorCode::InvalidNetwork,
          "placed batteries exceed battery_budget");
  return net;
}

bool effective_branch_state(const Network& net, std::string_view branch_id) {
  const Branch& br = net.branch(branch_id);
  if (!br.in_service) return false;
  const Switch* sw = net.switch_for_branch(branch_id);
  return sw == nullptr || sw->closed;
}

std::uint64_t network_fingerprint(const Network& net) {
  const NetworkData& d = net.data();
  Fnv f;
  f.num(d.base_mva);
  f.count(static_cast<std::size_t>(d.battery_budget));
  f.count(d.buses.size());
  for (const auto& b : d.buses) {
    f.str(b.id);
    f.str(b.name);
    f.num(b.nominal_kv);
    f.count(static_cast<std::size_t>(b.kind));
    f.num(b.v_min_pu);
    f.num(b.v_max_pu);
    f.flag(b.in_service);
  }
  f.count(d.branches.size());
  for (const auto& br : d.branches) {
    f.str(br.id);
    f.str(br.from_bus);
    f.str(br.to_bus);
    f.num(br.r_ohm);
    f.num(br.x_ohm);
    f.num(br.b_total_shunt_siemens);
    f.num(br.s_max_mva);
    f.num(br.i_max_ka);
    f.flag(br.in_service);
    f.flag(br.switchable);
  }
  f.count(d.switches.size());
  for (const auto& s : d.switches) {
    f.str(s.id);
    f.str(s.branch_id);
    f.flag(s.closed);
  }
  f.count(d.loads.size());
  for (const auto& l : d.loads) {
    f.str(l.id);
    f.str(l.bus_id);
    f.num(l.p_mw);
    f.num(l.q_mvar);
    f.flag(l.curtailable);
    f.num(l.gamma);
    f.num(l.gamma_max);
  }
  f.count(d.generators.size());
  for (const auto& g : d.generators) {
    f.str(g.id);
    f.str(g.bus_id);
    f.num(g.p_mw);
    f.num(g.v_set_pu);
    f.num(g.q_min_mvar);
    f.num(g.q_max_mvar);
  }
  f.count(d.batteries.size());
  for (const auto& b : d.batteries) {
    f.str(b.id);
    f.str(b.bus_id);
    f.flag(b.placed);
    f.num(b.p_mw);
    f.num(b.q_mvar);
    f.num(b.s_max_mva);
    f.num(b.p_max_mw);
    f.num(b.q_max_mvar);
  }
  return f.h;
}

std::string next_battery_id(const std::vector<std::string>& existing_ids) {
  std::unordered_set<std::string> used(existing_ids.begin(), existing_ids.end());
  for (std::size_t k = 1;; ++k) {
    std::string id = "BAT" + std::to_string(k);
    if (!used.contains(id)) return id;
  }
}

std::string next_battery_id(const Network& net) {
  std::vector<std::string> ids;
  ids.reserve(net.batteries().size());
  for (const auto& b : net.batteries()) ids.push_back(b.id);
  return next_battery_id(ids);
}

}  // namespace gridagent
