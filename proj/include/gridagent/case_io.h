#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gridagent/model.h"

namespace gridagent {

inline constexpr std::string_view kCaseSchemaVersion = "1.0";

/// Stress applied on top of a base case when it is loaded.
struct ScenarioOverlay {
  double load_scale = 1.0;                    // applied to every load (p and q)
  std::map<std::string, double> load_scales;  // per-load factors, applied after load_scale
  std::map<std::string, bool> switch_states;  // forced switch positions
  std::map<std::string, double> derates;      // branch id -> rating factor
  std::vector<std::string> open_branches;     // branches taken out of service

  bool empty() const;
  bool operator==(const ScenarioOverlay&) const = default;
};

struct CaseDocument {
  std::string schema_version{kCaseSchemaVersion};
  NetworkData network;
  ScenarioOverlay scenario;

  bool operator==(const CaseDocument&) const = default;
};

/// Parses and validates a native `.gridcase.json` document.
///
/// Throws SyntaxError (with line/column), SchemaError (naming the offending
/// field path) or SemanticError (payload fails network validation).
CaseDocument parse_case_json(std::string_view text);

/// Canonical, key-order-deterministic JSON. An empty overlay is omitted.
std::string serialize_case(const CaseDocument& doc);

/// Parses the bus/gen/branch matrix blocks of a MATPOWER case file.
///
/// Per-unit impedances are converted to ohms on the from-bus base, one load is
/// created per bus with nonzero demand, zero ratings become a 9999 MVA
/// placeholder. Unknown trailing columns and ignored data (shunts, taps) add a
/// warning.
CaseDocument parse_matpower_subset(std::string_view text, std::vector<std::string>* warnings = nullptr);

/// Applies the overlay to a payload (no validation).
NetworkData apply_overlay(NetworkData data, const ScenarioOverlay& overlay);

/// build_network(apply_overlay(doc.network, doc.scenario)).
Network network_from_case(const CaseDocument& doc);

/// The network's current state as an overlay-free document.
CaseDocument case_from_network(const Network& net);

/// serialize_case(case_from_network(net)); used for snapshots and byte-level
/// comparisons.
std::string serialize_network(const Network& net);

/// Names accepted by builtin_network(): ieee30, cigre_mv, ieee69.
const std::vector<std::string>& builtin_names();

/// Built-in benchmark case document. Throws UnknownCase.
CaseDocument builtin_case(std::string_view name);
Network builtin_network(std::string_view name);

/// Number of switches plus curtailable loads.
int controllable_element_count(const Network& net);

/// Loads a case by builtin name, `.m` MATPOWER file or native JSON file.
CaseDocument load_case(const std::string& name_or_path);

}  // namespace gridagent
