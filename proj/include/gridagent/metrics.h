#pragma once

#include <map>
#include <optional>
#include <string>

#include "json.hpp"

#include "gridagent/model.h"
#include "gridagent/violations.h"

namespace gridagent {

struct ResolutionResult;

inline constexpr int kCoordinationHops = 3;

struct RunMetrics {
  bool success = false;
  int iterations = 0;
  int total_actions = 0;
  double runtime_seconds = 0.0;
  std::optional<double> action_efficiency;  // none when no action was taken
  double coordination_score = 1.0;
  std::map<std::string, double> action_type_usage;  // switch | curtailment | battery -> fraction

  bool operator==(const RunMetrics&) const = default;
};

/// Success, efficiency (initial violations resolved per accepted action) and
/// coordination (share of accepted actions touching a bus within `hops` of a
/// violation active when their plan was proposed; 1.0 with no actions).
RunMetrics compute_metrics(const ResolutionResult& result, const ViolationReport& initial_report, const Network& net,
                           int hops = kCoordinationHops);

void to_json(nlohmann::json& j, const RunMetrics& m);
void from_json(const nlohmann::json& j, RunMetrics& m);

}  // namespace gridagent
