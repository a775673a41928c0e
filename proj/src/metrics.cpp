#include "gridagent/metrics.h"

#include <algorithm>
#include <set>
#include <tuple>

#include "gridagent/representation.h"
#include "gridagent/workflow.h"

namespace gridagent {

using nlohmann::json;

RunMetrics compute_metrics(const ResolutionResult& result, const ViolationReport& initial_report, const Network& net,
                           int hops) {
  RunMetrics m;
  m.success = result.status == RunStatus::Resolved;
  m.iterations = result.iterations;
  m.total_actions = static_cast<int>(result.accepted_actions.size());
  m.runtime_seconds = result.wall_time_seconds;

  std::set<std::tuple<ViolationKind, std::string>> remaining;
  for (const auto& v : result.final_report.violations) remaining.emplace(v.kind, v.element);
  int resolved = 0;
  for (const auto& v : initial_report.violations) {
    if (!remaining.contains({v.kind, v.element})) ++resolved;
  }
  if (m.total_actions > 0) m.action_efficiency = static_cast<double>(resolved) / m.total_actions;

  for (const auto& a : result.accepted_actions) m.action_type_usage[std::string(action_type(a.action))] += 1.0;
  for (auto& [_, v] : m.action_type_usage) v /= m.total_actions;

  // Buses are looked up on the final network: batteries created by a plan
  // only exist there.
  const Network& where = result.network.buses().empty() ? net : result.network;
  if (m.total_actions > 0) {
    int near = 0;
    for (const auto& attempt : result.attempts) {
      if (attempt.outcome != AttemptOutcome::Accepted) continue;
      const std::vector<int> dist = violation_distances(where, attempt.before.violations);
      for (const auto& action : attempt.plan.actions) {
        bool close = false;
        for (const auto& bus : action_buses(where, action)) {
          auto i = where.bus_index(bus);
          if (i && dist[*i] >= 0 && dist[*i] <= hops) close = true;
        }
        if (close) ++near;
      }
    }
    m.coordination_score = static_cast<double>(near) / m.total_actions;
  }
  return m;
}

void to_json(json& j, const RunMetrics& m) {
  j = json{{"success", m.success},
           {"iterations", m.iterations},
           {"total_actions", m.total_actions},
           {"runtime_seconds", m.runtime_seconds},
           {"action_efficiency", m.action_efficiency ? json(*m.action_efficiency) : json(nullptr)},
           {"coordination_score", m.coordination_score},
           {"action_type_usage", m.action_type_usage}};
}

void from_json(const json& j, RunMetrics& m) {
  m.success = j.at("success").get<bool>();
  m.iterations = j.at("iterations").get<int>();
  m.total_actions = j.at("total_actions").get<int>();
  m.runtime_seconds = j.value("runtime_seconds", 0.0);
  const json& eff = j.at("action_efficiency");
  m.action_efficiency = eff.is_null() ? std::nullopt : std::optional<double>(eff.get<double>());
  m.coordination_score = j.at("coordination_score").get<double>();
  m.action_type_usage = j.at("action_type_usage").get<std::map<std::string, double>>();
}

}  // namespace gridagent
