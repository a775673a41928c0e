#include "gridagent/violations.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>
#include <utility>

#include "gridagent/error.h"
#include "gridagent/hash.h"

namespace gridagent {

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::Undervoltage: return "undervoltage";
    case ViolationKind::Overvoltage: return "overvoltage";
    case ViolationKind::Thermal: return "thermal";
    case ViolationKind::Disconnected: return "disconnected";
  }
  return "undervoltage";
}

std::optional<ViolationKind> parse_violation_kind(std::string_view text) {
  if (text == "undervoltage") return ViolationKind::Undervoltage;
  if (text == "overvoltage") return ViolationKind::Overvoltage;
  if (text == "thermal") return ViolationKind::Thermal;
  if (text == "disconnected") return ViolationKind::Disconnected;
  return std::nullopt;
}

int ViolationCounts::of(ViolationKind kind) const {
  switch (kind) {
    case ViolationKind::Undervoltage: return undervoltage;
    case ViolationKind::Overvoltage: return overvoltage;
    case ViolationKind::Thermal: return thermal;
    case ViolationKind::Disconnected: return disconnected;
  }
  return 0;
}

std::uint64_t violation_fingerprint(const std::vector<Violation>& violations) {
  std::vector<std::pair<int, std::string_view>> keys;
  keys.reserve(violations.size());
  for (const auto& v : violations) keys.emplace_back(static_cast<int>(v.kind), v.element);
  std::sort(keys.begin(), keys.end());
  Fnv f;
  f.count(keys.size());
  for (const auto& [kind, element] : keys) {
    f.count(static_cast<std::size_t>(kind));
    f.str(element);
  }
  return f.h;
}

ViolationReport make_report(std::vector<Violation> violations) {
  ViolationReport r;
  r.violations = std::move(violations);
  for (const auto& v : r.violations) {
    switch (v.kind) {
      case ViolationKind::Undervoltage: ++r.counts.undervoltage; break;
      case ViolationKind::Overvoltage: ++r.counts.overvoltage; break;
      case ViolationKind::Thermal: ++r.counts.thermal; break;
      case ViolationKind::Disconnected: ++r.counts.disconnected; break;
    }
    r.total_severity += v.severity;
  }
  r.fingerprint = violation_fingerprint(r.violations);
  return r;
}

ViolationReport analyze(const Network& net, const PowerFlowSolution& sol) {
  if (sol.network_fingerprint != network_fingerprint(net) || sol.buses.size() != net.buses().size() ||
      sol.branches.size() != net.branches().size()) {
    throw Error(ErrorCode::StaleSolution, "solution does not belong to the current network state");
  }
  if (!sol.converged) {
    throw Error(ErrorCode::DivergedAnalysis, "power flow did not converge after " + std::to_string(sol.iterations) +
                                                 " iterations (mismatch " + std::to_string(sol.max_mismatch_pu) + " pu)");
  }

  std::vector<Violation> out;
  for (std::size_t i = 0; i < net.buses().size(); ++i) {
    const Bus& bus = net.buses()[i];
    const BusResult& res = sol.buses[i];
    if (!bus.in_service) continue;
    if (!res.energized) {
      out.push_back({ViolationKind::Disconnected, bus.id, std::nullopt, std::nullopt, 1.0});
    } else if (res.v_pu < bus.v_min_pu) {
      out.push_back({ViolationKind::Undervoltage, bus.id, res.v_pu, bus.v_min_pu, bus.v_min_pu - res.v_pu});
    } else if (res.v_pu > bus.v_max_pu) {
      out.push_back({ViolationKind::Overvoltage, bus.id, res.v_pu, bus.v_max_pu, res.v_pu - bus.v_max_pu});
    }
  }
  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    const BranchFlow& f = sol.branches[k];
    if (f.active && f.loading_percent > 100.0) {
      const double frac = f.loading_percent / 100.0;
      out.push_back({ViolationKind::Thermal, f.id, frac, 1.0, frac - 1.0});
    }
  }
  return make_report(std::move(out));
}

bool improves(const ViolationReport& before, const ViolationReport& after) {
  if (after.size() != before.size()) return after.size() < before.size();
  return after.total_severity < before.total_severity - kSeverityMargin;
}

Comparison compare(const ViolationReport& before, const ViolationReport& after) {
  using Key = std::pair<ViolationKind, std::string_view>;
  std::set<Key> in_before, in_after;
  for (const auto& v : before.violations) in_before.emplace(v.kind, v.element);
  for (const auto& v : after.violations) in_after.emplace(v.kind, v.element);

  Comparison c;
  for (const auto& v : before.violations) {
    if (!in_after.contains({v.kind, v.element})) c.resolved.push_back(v);
  }
  for (const auto& v : after.violations) {
    if (in_before.contains({v.kind, v.element})) {
      c.persisting.push_back(v);
    } else {
      c.introduced.push_back(v);
    }
  }
  c.improved = improves(before, after);
  return c;
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

std::uint64_t parse_fingerprint_hex(std::string_view text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, 16);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.size() != 16) {
    throw Error(ErrorCode::SchemaError, "invalid fingerprint '" + std::string(text) + "'");
  }
  return v;
}

void to_json(nlohmann::json& j, const Violation& v) {
  j = nlohmann::json{{"kind", to_string(v.kind)},
                     {"element", v.element},
                     {"observed", v.observed ? nlohmann::json(*v.observed) : nlohmann::json(nullptr)},
                     {"limit", v.limit ? nlohmann::json(*v.limit) : nlohmann::json(nullptr)},
                     {"severity", v.severity}};
}

void from_json(const nlohmann::json& j, Violation& v) {
  auto kind = parse_violation_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::SchemaError, "unknown violation kind " + j.at("kind").dump());
  v.kind = *kind;
  v.element = j.at("element").get<std::string>();
  v.observed = j.at("observed").is_null() ? std::nullopt : std::optional<double>(j.at("observed").get<double>());
  v.limit = j.at("limit").is_null() ? std::nullopt : std::optional<double>(j.at("limit").get<double>());
  v.severity = j.at("severity").get<double>();
}

void to_json(nlohmann::json& j, const ViolationReport& r) {
  j = nlohmann::json{{"violations", r.violations},
                     {"counts",
                      {{"undervoltage", r.counts.undervoltage},
                       {"overvoltage", r.counts.overvoltage},
                       {"thermal", r.counts.thermal},
                       {"disconnected", r.counts.disconnected},
                       {"total", r.counts.total()}}},
                     {"total_severity", r.total_severity},
                     {"fingerprint", fingerprint_hex(r.fingerprint)}};
}

void from_json(const nlohmann::json& j, ViolationReport& r) {
  r = make_report(j.at("violations").get<std::vector<Violation>>());
  // The stored sum may differ from the recomputed one in the last bit.
  r.total_severity = j.at("total_severity").get<double>();
  if (parse_fingerprint_hex(j.at("fingerprint").get<std::string>()) != r.fingerprint) {
    throw Error(ErrorCode::SchemaError, "violation report fingerprint does not match its violations");
  }
}

}  // namespace gridagent
