#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "gridagent/case_io.h"
#include "gridagent/planner.h"
#include "gridagent/violations.h"
#include "gridagent/workflow.h"

namespace gridagent {

// ------------------------------------------------------------- scenarios ---

struct ScaleLoad {
  double factor = 1.0;
  bool operator==(const ScaleLoad&) const = default;
};
struct OpenBranch {
  std::string branch_id;
  bool operator==(const OpenBranch&) const = default;
};
struct DerateBranch {
  std::string branch_id;
  double factor = 1.0;
  bool operator==(const DerateBranch&) const = default;
};
struct ForceSwitch {
  std::string switch_id;
  bool closed = true;
  bool operator==(const ForceSwitch&) const = default;
};

using Perturbation = std::variant<ScaleLoad, OpenBranch, DerateBranch, ForceSwitch>;

struct ViolationProfile {
  int total = 0;
  ViolationCounts counts;
  bool operator==(const ViolationProfile&) const = default;
};

struct Scenario {
  std::string name;
  std::string base;  // builtin name or case file path
  std::vector<Perturbation> perturbations;
  std::optional<ViolationProfile> expected_violation_profile;
  bool operator==(const Scenario&) const = default;
};

/// Applies perturbations in order. Throws UnknownElement for ids the base
/// does not have.
NetworkData apply_perturbations(NetworkData data, const std::vector<Perturbation>& perturbations);

/// The perturbed network as a standalone case document (no overlay).
CaseDocument scenario_case(const Scenario& s);
Network scenario_network(const Scenario& s);

void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);

struct ScenarioTarget {
  int count = 1;
  std::set<ViolationKind> kinds;          // each must be present; empty = any
  std::map<ViolationKind, int> min_by_kind;  // optional per-kind floors
};

struct GeneratorOptions {
  double max_load_scale = 2.5;
  bool allow_derate = true;
  bool allow_open = true;
};

/// Seeded search over load scaling (0.1 steps), branch derating (0.1 steps)
/// and branch openings until analyze() meets the target. Throws
/// TargetUnreachable.
Scenario generate_scenario(const std::string& base_name, const Network& base, const ScenarioTarget& target,
                           std::uint64_t seed, const GeneratorOptions& opts = {}, std::string name = {});

struct ScenarioPreset {
  std::string name;
  std::string base;
  ScenarioTarget target;
  std::uint64_t seed = 1;
};

const std::vector<ScenarioPreset>& scenario_presets();
const ScenarioPreset& scenario_preset(std::string_view name);  // throws UnknownCase
Scenario build_preset(const ScenarioPreset& preset);

// ------------------------------------------------------------- benchmark ---

using PlannerFactory = std::function<std::unique_ptr<Planner>()>;

struct RunRecord {
  Scenario scenario;
  CaseDocument initial_case;
  ResolutionResult result;
};

/// Solve + run on the scenario's network; wall time covers run() only.
RunRecord run_scenario(const Scenario& scenario, Planner& planner, const WorkflowOptions& opts = {});

struct BenchmarkRow {
  std::string scenario;
  int repetition = 0;
  std::string status;
  bool success = false;
  int initial_violations = 0;
  int final_violations = 0;
  int iterations = 0;
  int actions = 0;
  std::optional<double> action_efficiency;
  double coordination_score = 1.0;
  double runtime_seconds = 0.0;
  std::string failure;  // last planner error / abort detail for failed runs
};

struct BenchmarkReport {
  std::string planner;
  std::vector<BenchmarkRow> rows;
  double success_rate = 0.0;
  double mean_runtime_seconds = 0.0;
  double mean_iterations = 0.0;
  double mean_actions = 0.0;
  std::optional<double> mean_action_efficiency;  // over rows where it is defined
};

struct BenchmarkOptions {
  int repetitions = 1;
  int jobs = 1;
  WorkflowOptions workflow;
  /// Called with every finished run (in suite order) when set.
  std::function<void(const RunRecord&, int repetition)> on_run;
};

BenchmarkReport run_benchmark(const std::vector<Scenario>& suite, const PlannerFactory& make_planner,
                              const BenchmarkOptions& opts = {});

/// Aggregates over rows (also used to re-check reports).
void aggregate(BenchmarkReport& report);

/// Timing fields are dropped unless include_timing is set, so repeated runs
/// of a deterministic planner produce identical bytes.
nlohmann::json to_json(const BenchmarkReport& r, bool include_timing = false);
std::string format_table(const BenchmarkReport& r, bool include_timing = false);

// ---------------------------------------------------------------- export ---

nlohmann::json run_record_to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

struct TrainingRecord {
  std::string scenario;
  CaseDocument initial_case;
  ViolationReport initial_report;
  std::vector<Action> actions;
  std::string rationale;
  std::string explanation;
  RunMetrics metrics;
  std::string final_violation_fingerprint;  // hex
  std::string final_network_fingerprint;    // hex
  Prompt prompt;                            // recreated planner prompt for the initial state
  std::string assistant;                    // tool-call JSON of the accepted actions

  bool operator==(const TrainingRecord&) const;
};

enum class ExportFormat { Jsonl, ChatJsonl };

std::optional<TrainingRecord> make_training_record(const RunRecord& run, const WorkflowOptions& opts = {});

nlohmann::json to_json(const TrainingRecord& r);
TrainingRecord training_record_from_json(const nlohmann::json& j);

/// Applies the record's actions to its initial case and solves. True iff
/// both recorded fingerprints are reproduced.
bool replay_matches(const TrainingRecord& r, const SolveOptions& opts = {});

struct ExportSummary {
  int written = 0;
  int skipped = 0;  // unsuccessful runs
};

/// One line per successful run. Throws WriteError.
ExportSummary export_training_data(const std::vector<RunRecord>& runs, ExportFormat format, const std::string& path,
                                   const WorkflowOptions& opts = {});

}  // namespace gridagent
