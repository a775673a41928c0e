#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gridagent/model.h"
#include "gridagent/powerflow.h"

namespace gridagent {

enum class ViolationKind { Undervoltage, Overvoltage, Thermal, Disconnected };

std::string_view to_string(ViolationKind kind);
std::optional<ViolationKind> parse_violation_kind(std::string_view text);

struct Violation {
  ViolationKind kind = ViolationKind::Undervoltage;
  std::string element;            // bus id, or branch id for thermal
  std::optional<double> observed;  // v_pu or loading fraction; none when disconnected
  std::optional<double> limit;
  double severity = 0.0;

  bool operator==(const Violation&) const = default;
};

struct ViolationCounts {
  int undervoltage = 0;
  int overvoltage = 0;
  int thermal = 0;
  int disconnected = 0;

  int total() const { return undervoltage + overvoltage + thermal + disconnected; }
  int of(ViolationKind kind) const;
  bool operator==(const ViolationCounts&) const = default;
};

struct ViolationReport {
  std::vector<Violation> violations;  // buses in network order, then branches
  ViolationCounts counts;
  double total_severity = 0.0;
  std::uint64_t fingerprint = 0;

  std::size_t size() const { return violations.size(); }
  bool empty() const { return violations.empty(); }
  bool operator==(const ViolationReport&) const = default;
};

/// Order-independent hash of the (kind, element) pairs.
std::uint64_t violation_fingerprint(const std::vector<Violation>& violations);

/// Fills counts, total severity and fingerprint from the violation list.
ViolationReport make_report(std::vector<Violation> violations);

/// Scans every bus and branch of a solved network.
///
/// Throws StaleSolution if the network changed since the solve and
/// DivergedAnalysis if the solve did not converge.
ViolationReport analyze(const Network& net, const PowerFlowSolution& sol);

struct Comparison {
  std::vector<Violation> resolved;    // in `before`, not in `after`
  std::vector<Violation> persisting;  // in both (entries from `after`)
  std::vector<Violation> introduced;  // in `after` only
  bool improved = false;
};

/// Lexicographic (count, total severity) improvement test; severity must drop
/// by more than kSeverityMargin when counts are equal.
inline constexpr double kSeverityMargin = 1e-9;
bool improves(const ViolationReport& before, const ViolationReport& after);
Comparison compare(const ViolationReport& before, const ViolationReport& after);

void to_json(nlohmann::json& j, const Violation& v);
void from_json(const nlohmann::json& j, Violation& v);
void to_json(nlohmann::json& j, const ViolationReport& r);
void from_json(const nlohmann::json& j, ViolationReport& r);

/// Fingerprints travel as 16-digit hex strings (JSON numbers lose precision
/// past 2^53 in most consumers).
std::string fingerprint_hex(std::uint64_t fp);
std::uint64_t parse_fingerprint_hex(std::string_view text);

}  // namespace gridagent
