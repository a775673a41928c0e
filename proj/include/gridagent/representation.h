#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gridagent/model.h"
#include "gridagent/powerflow.h"
#include "gridagent/violations.h"

namespace gridagent {

enum class ContextMode { FullDetail, SemanticGraph };

std::string_view to_string(ContextMode mode);

inline constexpr int kDefaultFocusHops = 3;

struct NetworkContext {
  ContextMode mode = ContextMode::FullDetail;
  std::string text;
  std::size_t token_estimate = 0;
  std::set<std::string> included_elements;
  std::vector<Violation> focus_violations;
};

/// ceil(characters / 4).
std::size_t estimate_tokens(std::string_view text);

/// Every element listed line by line, plus the violation list.
NetworkContext render_full(const Network& net, const PowerFlowSolution& sol, const ViolationReport& report);

/// Violations, everything within `hops` of them, and one summary line per
/// pruned healthy section. Throws std::invalid_argument if hops < 1.
NetworkContext render_semantic_graph(const Network& net, const PowerFlowSolution& sol, const ViolationReport& report,
                                     int hops = kDefaultFocusHops);

/// FullDetail iff the full rendering fits the budget (inclusive).
ContextMode choose_mode(const Network& net, const PowerFlowSolution& sol, const ViolationReport& report,
                        std::size_t budget);

/// choose_mode() followed by the matching renderer.
NetworkContext render_context(const Network& net, const PowerFlowSolution& sol, const ViolationReport& report,
                              std::size_t budget, int hops = kDefaultFocusHops);

/// Hop distance of every bus to the nearest violated element over the physical
/// graph (a thermal violation counts both branch ends as distance 0). Indexed
/// by bus; -1 when unreachable.
std::vector<int> violation_distances(const Network& net, const std::vector<Violation>& violations);

}  // namespace gridagent
