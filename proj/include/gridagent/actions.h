#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "gridagent/model.h"

namespace gridagent {

struct SetSwitch {
  std::string switch_id;
  bool closed = true;
  bool operator==(const SetSwitch&) const = default;
};

// Absolute: re-curtailing replaces the fraction.
struct CurtailLoad {
  std::string load_id;
  double gamma = 0.0;
  bool operator==(const CurtailLoad&) const = default;
};

struct AddBattery {
  std::string bus_id;
  double s_max_mva = 0.0;
  double p_max_mw = 0.0;
  double q_max_mvar = 0.0;
  bool operator==(const AddBattery&) const = default;
};

struct DispatchBattery {
  std::string battery_id;
  double p_mw = 0.0;
  double q_mvar = 0.0;
  bool operator==(const DispatchBattery&) const = default;
};

using Action = std::variant<SetSwitch, CurtailLoad, AddBattery, DispatchBattery>;

/// Battery capability used when a planner does not size the battery.
struct ActionConfig {
  double battery_s_max_mva = 5.0;
  double battery_p_max_mw = 5.0;
  double battery_q_max_mvar = 5.0;

  AddBattery default_battery(std::string bus_id) const;
  /// Capability for an explicitly sized battery: P/Q limits are the defaults
  /// clipped to s_max.
  AddBattery sized_battery(std::string bus_id, double s_max_mva) const;
};

enum class DiagnosticCode {
  UnknownElement,
  NotCurtailable,
  GammaOutOfRange,
  BudgetExceeded,
  BusAlreadyHasBattery,
  InvalidCapability,
  NotPlaced,
  ApparentPowerExceeded,
  ActivePowerExceeded,
  ReactivePowerExceeded,
  NonFinite,
};

std::string_view to_string(DiagnosticCode code);

struct Diagnostic {
  DiagnosticCode code;
  std::string message;
};

/// Checks an action against the network without touching it.
std::optional<Diagnostic> validate_action(const Network& net, const Action& action);

struct UndoRecord {
  enum class Kind { Switch, Gamma, BatteryPlacement, BatteryDispatch };
  Kind kind = Kind::Switch;
  std::string element;
  bool previous_closed = false;
  double previous_gamma = 0.0;
  // BatteryPlacement: the slot that was overwritten, or none if the battery
  // was appended (undo erases it).
  std::optional<Battery> previous_battery;
  double previous_p_mw = 0.0;
  double previous_q_mvar = 0.0;
};

/// Applies a validated action. Throws InvalidAction if validation fails.
UndoRecord apply_action(Network& net, const Action& action);
void undo(Network& net, const UndoRecord& record);

struct PlanApplication {
  std::vector<UndoRecord> undo_stack;  // most recent first
  std::optional<std::size_t> failed_index;
  std::optional<Diagnostic> diagnostic;

  bool ok() const { return !failed_index.has_value(); }
};

/// Applies actions in order, stopping at the first invalid one. Actions
/// before it stay applied; undo_plan() with the returned stack reverts them.
PlanApplication apply_plan(Network& net, const std::vector<Action>& actions);
void undo_plan(Network& net, const std::vector<UndoRecord>& undo_stack);

/// Id the next AddBattery on this network will create (or the existing
/// unplaced slot it will fill).
std::string battery_id_for(const Network& net, std::string_view bus_id);

/// Buses an action touches electrically (switch: both branch ends).
std::vector<std::string> action_buses(const Network& net, const Action& action);

std::string_view action_type(const Action& action);  // switch | curtailment | battery
std::string_view tool_name(const Action& action);
std::string describe(const Action& action);

/// Tool-call wire form: {"tool": ..., "args": {...}}.
nlohmann::json to_tool_call(const Action& action);

}  // namespace gridagent
