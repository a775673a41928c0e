#include "gridagent/actions.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gridagent/error.h"

namespace gridagent {

namespace {

// Same slack as build_network() so that anything validated here also passes
// the network invariants.
constexpr double kCapabilitySlack = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fmt_num(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Diagnostic diag(DiagnosticCode code, std::string message) { return {code, std::move(message)}; }

const Battery* unplaced_slot(const Network& net, std::string_view bus_id) {
  for (const auto& b : net.batteries()) {
    if (b.bus_id == bus_id && !b.placed) return &b;
  }
  return nullptr;
}

}  // namespace

AddBattery ActionConfig::default_battery(std::string bus_id) const {
  return {std::move(bus_id), battery_s_max_mva, battery_p_max_mw, battery_q_max_mvar};
}

AddBattery ActionConfig::sized_battery(std::string bus_id, double s_max_mva) const {
  return {std::move(bus_id), s_max_mva, std::min(battery_p_max_mw, s_max_mva), std::min(battery_q_max_mvar, s_max_mva)};
}

std::string_view to_string(DiagnosticCode code) {
  switch (code) {
    case DiagnosticCode::UnknownElement: return "UnknownElement";
    case DiagnosticCode::NotCurtailable: return "NotCurtailable";
    case DiagnosticCode::GammaOutOfRange: return "GammaOutOfRange";
    case DiagnosticCode::BudgetExceeded: return "BudgetExceeded";
    case DiagnosticCode::BusAlreadyHasBattery: return "BusAlreadyHasBattery";
    case DiagnosticCode::InvalidCapability: return "InvalidCapability";
    case DiagnosticCode::NotPlaced: return "NotPlaced";
    case DiagnosticCode::ApparentPowerExceeded: return "ApparentPowerExceeded";
    case DiagnosticCode::ActivePowerExceeded: return "ActivePowerExceeded";
    case DiagnosticCode::ReactivePowerExceeded: return "ReactivePowerExceeded";
    case DiagnosticCode::NonFinite: return "NonFinite";
  }
  return "Unknown";
}

std::optional<Diagnostic> validate_action(const Network& net, const Action& action) {
  return std::visit(
      Overloaded{
          [&](const SetSwitch& a) -> std::optional<Diagnostic> {
            if (!net.switch_index(a.switch_id)) {
              return diag(DiagnosticCode::UnknownElement, "switch '" + a.switch_id + "' does not exist");
            }
            return std::nullopt;
          },
          [&](const CurtailLoad& a) -> std::optional<Diagnostic> {
            auto i = net.load_index(a.load_id);
            if (!i) return diag(DiagnosticCode::UnknownElement, "load '" + a.load_id + "' does not exist");
            const Load& load = net.loads()[*i];
            if (!load.curtailable) return diag(DiagnosticCode::NotCurtailable, "load '" + a.load_id + "' is not curtailable");
            if (!std::isfinite(a.gamma)) return diag(DiagnosticCode::NonFinite, "gamma must be finite");
            if (a.gamma < 0.0 || a.gamma > load.gamma_max) {
              return diag(DiagnosticCode::GammaOutOfRange, "gamma " + fmt_num(a.gamma) + " outside [0, " +
                                                               fmt_num(load.gamma_max) + "] for load '" + a.load_id + "'");
            }
            return std::nullopt;
          },
          [&](const AddBattery& a) -> std::optional<Diagnostic> {
            if (!net.bus_index(a.bus_id)) return diag(DiagnosticCode::UnknownElement, "bus '" + a.bus_id + "' does not exist");
            if (!std::isfinite(a.s_max_mva) || !std::isfinite(a.p_max_mw) || !std::isfinite(a.q_max_mvar)) {
              return diag(DiagnosticCode::NonFinite, "battery capability must be finite");
            }
            if (a.s_max_mva <= 0.0 || a.p_max_mw < 0.0 || a.q_max_mvar < 0.0) {
              return diag(DiagnosticCode::InvalidCapability, "battery capability must be positive");
            }
            if (net.placed_battery_count() >= net.battery_budget()) {
              return diag(DiagnosticCode::BudgetExceeded, "battery budget of " + std::to_string(net.battery_budget()) +
                                                              " already used");
            }
            for (const auto& b : net.batteries()) {
              if (b.placed && b.bus_id == a.bus_id) {
                return diag(DiagnosticCode::BusAlreadyHasBattery, "bus '" + a.bus_id + "' already has battery '" + b.id + "'");
              }
            }
            return std::nullopt;
          },
          [&](const DispatchBattery& a) -> std::optional<Diagnostic> {
            auto i = net.battery_index(a.battery_id);
            if (!i) return diag(DiagnosticCode::UnknownElement, "battery '" + a.battery_id + "' does not exist");
            const Battery& b = net.batteries()[*i];
            if (!b.placed) return diag(DiagnosticCode::NotPlaced, "battery '" + a.battery_id + "' is not placed");
            if (!std::isfinite(a.p_mw) || !std::isfinite(a.q_mvar)) {
              return diag(DiagnosticCode::NonFinite, "dispatch must be finite");
            }
            const double s2 = a.p_mw * a.p_mw + a.q_mvar * a.q_mvar;
            const double cap2 = b.s_max_mva * b.s_max_mva;
            if (s2 > cap2 * (1.0 + kCapabilitySlack)) {
              return diag(DiagnosticCode::ApparentPowerExceeded,
                          "p^2 + q^2 = " + fmt_num(s2) + " exceeds s_max^2 = " + fmt_num(cap2));
            }
            if (std::abs(a.p_mw) > b.p_max_mw * (1.0 + kCapabilitySlack)) {
              return diag(DiagnosticCode::ActivePowerExceeded,
                          "|p| = " + fmt_num(std::abs(a.p_mw)) + " exceeds p_max = " + fmt_num(b.p_max_mw));
            }
            if (std::abs(a.q_mvar) > b.q_max_mvar * (1.0 + kCapabilitySlack)) {
              return diag(DiagnosticCode::ReactivePowerExceeded,
                          "|q| = " + fmt_num(std::abs(a.q_mvar)) + " exceeds q_max = " + fmt_num(b.q_max_mvar));
            }
            return std::nullopt;
          },
      },
      action);
}

std::string battery_id_for(const Network& net, std::string_view bus_id) {
  if (const Battery* slot = unplaced_slot(net, bus_id)) return slot->id;
  return next_battery_id(net);
}

UndoRecord apply_action(Network& net, const Action& action) {
  if (auto d = validate_action(net, action)) {
    throw Error(ErrorCode::InvalidAction, std::string(to_string(d->code)) + ": " + d->message);
  }
  UndoRecord rec;
  std::visit(Overloaded{
                 [&](const SetSwitch& a) {
                   rec.kind = UndoRecord::Kind::Switch;
                   rec.element = a.switch_id;
                   rec.previous_closed = net.switch_(a.switch_id).closed;
                   net.set_switch_closed(a.switch_id, a.closed);
                 },
                 [&](const CurtailLoad& a) {
                   rec.kind = UndoRecord::Kind::Gamma;
                   rec.element = a.load_id;
                   rec.previous_gamma = net.load(a.load_id).gamma;
                   net.set_load_gamma(a.load_id, a.gamma);
                 },
                 [&](const AddBattery& a) {
                   rec.kind = UndoRecord::Kind::BatteryPlacement;
                   Battery placed{"", a.bus_id, true, 0.0, 0.0, a.s_max_mva, a.p_max_mw, a.q_max_mvar};
                   if (const Battery* slot = unplaced_slot(net, a.bus_id)) {
                     rec.previous_battery = *slot;
                     placed.id = slot->id;
                     rec.element = slot->id;
                     net.set_battery(placed.id, placed);
                   } else {
                     placed.id = next_battery_id(net);
                     rec.element = placed.id;
                     net.insert_battery(net.batteries().size(), placed);
                   }
                 },
                 [&](const DispatchBattery& a) {
                   rec.kind = UndoRecord::Kind::BatteryDispatch;
                   rec.element = a.battery_id;
                   Battery b = net.battery(a.battery_id);
                   rec.previous_p_mw = b.p_mw;
                   rec.previous_q_mvar = b.q_mvar;
                   b.p_mw = a.p_mw;
                   b.q_mvar = a.q_mvar;
                   net.set_battery(a.battery_id, b);
                 },
             },
             action);
  return rec;
}

void undo(Network& net, const UndoRecord& rec) {
  switch (rec.kind) {
    case UndoRecord::Kind::Switch:
      net.set_switch_closed(rec.element, rec.previous_closed);
      break;
    case UndoRecord::Kind::Gamma:
      net.set_load_gamma(rec.element, rec.previous_gamma);
      break;
    case UndoRecord::Kind::BatteryPlacement:
      if (rec.previous_battery) {
        net.set_battery(rec.element, *rec.previous_battery);
      } else {
        net.erase_battery(rec.element);
      }
      break;
    case UndoRecord::Kind::BatteryDispatch: {
      Battery b = net.battery(rec.element);
      b.p_mw = rec.previous_p_mw;
      b.q_mvar = rec.previous_q_mvar;
      net.set_battery(rec.element, b);
      break;
    }
  }
}

PlanApplication apply_plan(Network& net, const std::vector<Action>& actions) {
  PlanApplication out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (auto d = validate_action(net, actions[i])) {
      out.failed_index = i;
      out.diagnostic = std::move(d);
      break;
    }
    out.undo_stack.insert(out.undo_stack.begin(), apply_action(net, actions[i]));
  }
  return out;
}

void undo_plan(Network& net, const std::vector<UndoRecord>& undo_stack) {
  for (const auto& rec : undo_stack) undo(net, rec);
}

std::vector<std::string> action_buses(const Network& net, const Action& action) {
  return std::visit(Overloaded{
                        [&](const SetSwitch& a) -> std::vector<std::string> {
                          const auto* sw = net.switch_index(a.switch_id) ? &net.switch_(a.switch_id) : nullptr;
                          if (sw == nullptr) return {};
                          const Branch& br = net.branch(sw->branch_id);
                          return {br.from_bus, br.to_bus};
                        },
                        [&](const CurtailLoad& a) -> std::vector<std::string> {
                          if (!net.load_index(a.load_id)) return {};
                          return {net.load(a.load_id).bus_id};
                        },
                        [&](const AddBattery& a) -> std::vector<std::string> { return {a.bus_id}; },
                        [&](const DispatchBattery& a) -> std::vector<std::string> {
                          if (!net.battery_index(a.battery_id)) return {};
                          return {net.battery(a.battery_id).bus_id};
                        },
                    },
                    action);
}

std::string_view action_type(const Action& action) {
  switch (action.index()) {
    case 0: return "switch";
    case 1: return "curtailment";
    default: return "battery";
  }
}

std::string_view tool_name(const Action& action) {
  switch (action.index()) {
    case 0: return "update_switch_status";
    case 1: return "curtail_load";
    case 2: return "add_battery";
    default: return "dispatch_battery";
  }
}

std::string describe(const Action& action) {
  return std::visit(Overloaded{
                        [](const SetSwitch& a) {
                          return "update_switch_status(" + a.switch_id + " -> " + (a.closed ? "closed" : "open") + ")";
                        },
                        [](const CurtailLoad& a) {
                          return "curtail_load(" + a.load_id + ", gamma=" + fmt_num(a.gamma, 2) + ")";
                        },
                        [](const AddBattery& a) {
                          return "add_battery(bus " + a.bus_id + ", " + fmt_num(a.s_max_mva, 2) + " MVA)";
                        },
                        [](const DispatchBattery& a) {
                          return "dispatch_battery(" + a.battery_id + ", p=" + fmt_num(a.p_mw, 2) +
                                 " MW, q=" + fmt_num(a.q_mvar, 2) + " Mvar)";
                        },
                    },
                    action);
}

nlohmann::json to_tool_call(const Action& action) {
  nlohmann::json args = std::visit(Overloaded{
                                       [](const SetSwitch& a) {
                                         return nlohmann::json{{"switch_id", a.switch_id}, {"closed", a.closed}};
                                       },
                                       [](const CurtailLoad& a) {
                                         return nlohmann::json{{"load_id", a.load_id}, {"gamma", a.gamma}};
                                       },
                                       [](const AddBattery& a) {
                                         return nlohmann::json{{"bus_id", a.bus_id}, {"s_max_mva", a.s_max_mva}};
                                       },
                                       [](const DispatchBattery& a) {
                                         return nlohmann::json{
                                             {"battery_id", a.battery_id}, {"p_mw", a.p_mw}, {"q_mvar", a.q_mvar}};
                                       },
                                   },
                                   action);
  return nlohmann::json{{"tool", tool_name(action)}, {"args", std::move(args)}};
}

}  // namespace gridagent
