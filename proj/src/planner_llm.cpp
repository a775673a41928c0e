// LLM side of the planner: prompt text, tool-call parsing, chat plumbing.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "gridagent/error.h"
#include "gridagent/planner.h"

namespace gridagent {

using nlohmann::json;

// --------------------------------------------------------------- prompt ---

namespace {

constexpr std::string_view kRole =
    "You are an expert power system operator. You resolve voltage, thermal and disconnection violations in the "
    "distribution network described below by issuing control actions through tools.";

constexpr std::string_view kToolSchemas =
    "- update_switch_status {\"switch_id\": string, \"closed\": bool}: open or close a sectionalizing/tie switch.\n"
    "- curtail_load {\"load_id\": string, \"gamma\": number in [0, gamma_max]}: curtail a load to (1 - gamma) of "
    "its demand; gamma is absolute, not incremental.\n"
    "- add_battery {\"bus_id\": string, \"p_mw\"?: number, \"q_mvar\"?: number, \"s_max_mva\"?: number}: place a "
    "battery at a bus (one per bus, within the budget); p_mw/q_mvar dispatch it immediately.\n"
    "- dispatch_battery {\"battery_id\": string, \"p_mw\": number, \"q_mvar\": number}: set a placed battery's "
    "injection (positive = into the grid), within p^2 + q^2 <= s_max^2.\n";

constexpr std::string_view kOutputSchema =
    "Respond with JSON only, no prose and no markdown, matching exactly:\n"
    "{\"actions\": [{\"tool\": \"<tool name>\", \"args\": {...}}], \"rationale\": \"<one short paragraph>\"}\n"
    "Actions are applied in order. Include at least one action.";

std::string fmt_double(double v) { return fmt::format("{:.4g}", v); }

std::string action_space_text(const Capabilities& caps) {
  std::string out{kToolSchemas};
  out += "\nAvailable elements:\n";
  if (caps.switches.empty()) {
    out += "switches: none\n";
  } else {
    out += "switches:\n";
    for (const auto& s : caps.switches) {
      out += fmt::format("  {} on branch {} ({}-{}), currently {}\n", s.id, s.branch_id, s.from_bus, s.to_bus,
                         s.closed ? "closed" : "open");
    }
  }
  if (caps.curtailable_loads.empty()) {
    out += "curtailable loads: none\n";
  } else {
    out += "curtailable loads:\n";
    for (const auto& l : caps.curtailable_loads) {
      out += fmt::format("  {} at bus {}, {} MW, gamma {} (max {})\n", l.id, l.bus_id, fmt_double(l.p_mw),
                         fmt_double(l.gamma), fmt_double(l.gamma_max));
    }
  }
  bool any_placed = false;
  for (const auto& b : caps.batteries) {
    if (!b.placed) continue;
    if (!any_placed) out += "placed batteries:\n";
    any_placed = true;
    out += fmt::format("  {} at bus {}, s_max {} MVA, p_max {} MW, q_max {} Mvar\n", b.id, b.bus_id,
                       fmt_double(b.s_max_mva), fmt_double(b.p_max_mw), fmt_double(b.q_max_mvar));
  }
  const auto& d = caps.battery_defaults;
  out += fmt::format("battery budget remaining: {}; default capability s_max {} MVA, p_max {} MW, q_max {} Mvar\n",
                     caps.battery_budget_remaining, fmt_double(d.battery_s_max_mva), fmt_double(d.battery_p_max_mw),
                     fmt_double(d.battery_q_max_mvar));
  return out;
}

std::string violation_line(const Violation& v) {
  std::string line = fmt::format("- {} {}", to_string(v.kind), v.element);
  if (v.observed && v.limit) {
    line += v.kind == ViolationKind::Thermal
                ? fmt::format(": loading {:.1f}% (limit {:.0f}%)", *v.observed * 100.0, *v.limit * 100.0)
                : fmt::format(": {:.4f} pu (limit {:.4f} pu)", *v.observed, *v.limit);
  } else if (v.kind == ViolationKind::Disconnected) {
    line += ": not energized";
  }
  return line + fmt::format(", severity {:.4f}", v.severity);
}

}  // namespace

Prompt build_prompt(const PlanRequest& req) {
  Prompt p;
  p.system = fmt::format(
      "# Role\n{}\n\n# Network state ({})\n{}\n\n# Action space\n{}\n# Priority policy\n{}\n"
      "Treat the priorities as guidance: use a lower-priority action when higher ones cannot help.\n\n"
      "# Output format\n{}\n",
      kRole, to_string(req.context.mode), req.context.text, action_space_text(req.available_actions),
      req.priority_policy, kOutputSchema);

  const auto& violations = req.report.violations.empty() ? req.context.focus_violations : req.report.violations;
  std::string user = fmt::format("Current violations ({}):\n", violations.size());
  for (const auto& v : violations) user += violation_line(v) + "\n";
  user += fmt::format("\nIterations remaining: {}\n", req.t_max_remaining);
  if (!req.history.empty()) {
    user += "\nPrevious attempts that were rejected:\n";
    for (const auto& h : req.history) user += "- " + h + "\n";
  }
  user += "\nPropose the next plan as JSON.";
  p.user = std::move(user);
  return p;
}

// -------------------------------------------------------------- parsing ---

namespace {

// End (exclusive) of the bracketed value starting at `start`, skipping string
// contents; npos if unbalanced.
std::size_t balanced_end(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::optional<json> first_json_value(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{' && text[i] != '[') continue;
    const std::size_t end = balanced_end(text, i);
    if (end == std::string_view::npos) continue;
    json j = json::parse(text.substr(i, end - i), nullptr, false);
    if (!j.is_discarded() && !j.empty()) return j;
  }
  return std::nullopt;
}

[[noreturn]] void bad_args(std::size_t index, const std::string& reason) {
  throw Error(ErrorCode::InvalidArguments, fmt::format("action {}: {}", index, reason));
}

const json& require(const json& args, std::size_t index, const char* key) {
  auto it = args.find(key);
  if (it == args.end()) bad_args(index, fmt::format("missing argument '{}'", key));
  return *it;
}

std::string string_arg(const json& args, std::size_t index, const char* key) {
  const json& v = require(args, index, key);
  if (!v.is_string()) bad_args(index, fmt::format("'{}' must be a string", key));
  return v.get<std::string>();
}

double number_arg(const json& v, std::size_t index, const char* key) {
  if (!v.is_number()) bad_args(index, fmt::format("'{}' must be a number", key));
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad_args(index, fmt::format("'{}' must be finite", key));
  return x;
}

std::optional<double> optional_number(const json& args, std::size_t index, const char* key) {
  auto it = args.find(key);
  if (it == args.end() || it->is_null()) return std::nullopt;
  return number_arg(*it, index, key);
}

void reject_unknown_keys(const json& args, std::size_t index, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : args.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      bad_args(index, fmt::format("unexpected argument '{}'", key));
    }
  }
}

// Capability snapshot plus batteries added earlier in the plan being parsed.
struct BatteryView {
  std::string id;
  std::string bus_id;
  bool placed = false;
  double s_max = 0.0, p_max = 0.0, q_max = 0.0;
};

class PlanChecker {
 public:
  explicit PlanChecker(const Capabilities& caps) : caps_(caps), budget_(caps.battery_budget_remaining) {
    for (const auto& b : caps.batteries) {
      batteries_.push_back({b.id, b.bus_id, b.placed, b.s_max_mva, b.p_max_mw, b.q_max_mvar});
    }
  }

  void check_switch(std::size_t index, const SetSwitch& a) const {
    const bool known = std::any_of(caps_.switches.begin(), caps_.switches.end(),
                                   [&](const auto& s) { return s.id == a.switch_id; });
    if (!known) bad_args(index, fmt::format("unknown switch '{}'", a.switch_id));
  }

  void check_curtail(std::size_t index, const CurtailLoad& a) const {
    auto it = std::find_if(caps_.curtailable_loads.begin(), caps_.curtailable_loads.end(),
                           [&](const auto& l) { return l.id == a.load_id; });
    if (it == caps_.curtailable_loads.end()) bad_args(index, fmt::format("'{}' is not a curtailable load", a.load_id));
    if (a.gamma < 0.0 || a.gamma > it->gamma_max) {
      bad_args(index, fmt::format("gamma {} outside [0, {}] for '{}'", a.gamma, it->gamma_max, a.load_id));
    }
  }

  // Returns the id the new battery will get.
  std::string add(std::size_t index, const AddBattery& a) {
    if (std::find(caps_.bus_ids.begin(), caps_.bus_ids.end(), a.bus_id) == caps_.bus_ids.end()) {
      bad_args(index, fmt::format("unknown bus '{}'", a.bus_id));
    }
    if (a.s_max_mva <= 0.0) bad_args(index, "s_max_mva must be positive");
    if (budget_ <= 0) bad_args(index, "battery budget exhausted");
    for (const auto& b : batteries_) {
      if (b.placed && b.bus_id == a.bus_id) bad_args(index, fmt::format("bus '{}' already has battery '{}'", a.bus_id, b.id));
    }
    --budget_;
    for (auto& b : batteries_) {
      if (!b.placed && b.bus_id == a.bus_id) {
        b = {b.id, a.bus_id, true, a.s_max_mva, a.p_max_mw, a.q_max_mvar};
        return b.id;
      }
    }
    std::vector<std::string> ids;
    for (const auto& b : batteries_) ids.push_back(b.id);
    std::string id = next_battery_id(ids);
    batteries_.push_back({id, a.bus_id, true, a.s_max_mva, a.p_max_mw, a.q_max_mvar});
    return id;
  }

  void check_dispatch(std::size_t index, const DispatchBattery& a) const {
    auto it = std::find_if(batteries_.begin(), batteries_.end(), [&](const auto& b) { return b.id == a.battery_id; });
    if (it == batteries_.end()) bad_args(index, fmt::format("unknown battery '{}'", a.battery_id));
    if (!it->placed) bad_args(index, fmt::format("battery '{}' is not placed", a.battery_id));
    constexpr double slack = 1e-12;
    if (a.p_mw * a.p_mw + a.q_mvar * a.q_mvar > it->s_max * it->s_max * (1.0 + slack)) {
      bad_args(index, fmt::format("dispatch exceeds s_max {} MVA of '{}'", it->s_max, a.battery_id));
    }
    if (std::abs(a.p_mw) > it->p_max * (1.0 + slack)) bad_args(index, fmt::format("|p_mw| exceeds p_max {}", it->p_max));
    if (std::abs(a.q_mvar) > it->q_max * (1.0 + slack)) bad_args(index, fmt::format("|q_mvar| exceeds q_max {}", it->q_max));
  }

 private:
  const Capabilities& caps_;
  int budget_;
  std::vector<BatteryView> batteries_;
};

}  // namespace

Plan parse_tool_calls(std::string_view text, const Capabilities& caps, std::string planner_id) {
  std::optional<json> doc = first_json_value(text);
  if (!doc) throw Error(ErrorCode::NoJsonFound, "response contains no JSON object");

  Plan plan;
  plan.planner_id = std::move(planner_id);
  const json* actions = nullptr;
  if (doc->is_array()) {
    actions = &*doc;  // bare list of tool calls
  } else {
    auto it = doc->find("actions");
    if (it == doc->end()) throw Error(ErrorCode::SchemaMismatch, "missing 'actions'");
    if (!it->is_array()) throw Error(ErrorCode::SchemaMismatch, "'actions' must be an array");
    actions = &*it;
    if (auto r = doc->find("rationale"); r != doc->end()) {
      if (!r->is_string()) throw Error(ErrorCode::SchemaMismatch, "'rationale' must be a string");
      plan.rationale = r->get<std::string>();
    }
  }
  if (actions->empty()) throw Error(ErrorCode::SchemaMismatch, "'actions' is empty");

  PlanChecker checker(caps);
  for (std::size_t i = 0; i < actions->size(); ++i) {
    const json& call = (*actions)[i];
    if (!call.is_object() || !call.contains("tool") || !call["tool"].is_string()) {
      throw Error(ErrorCode::SchemaMismatch, fmt::format("action {} must be an object with a string 'tool'", i));
    }
    const std::string tool = call["tool"].get<std::string>();
    const json args = call.value("args", json::object());
    if (!args.is_object()) throw Error(ErrorCode::SchemaMismatch, fmt::format("action {}: 'args' must be an object", i));

    if (tool == "update_switch_status") {
      reject_unknown_keys(args, i, {"switch_id", "closed"});
      const json& closed = require(args, i, "closed");
      if (!closed.is_boolean()) bad_args(i, "'closed' must be a bool");
      SetSwitch a{string_arg(args, i, "switch_id"), closed.get<bool>()};
      checker.check_switch(i, a);
      plan.actions.emplace_back(std::move(a));
    } else if (tool == "curtail_load") {
      reject_unknown_keys(args, i, {"load_id", "gamma"});
      CurtailLoad a{string_arg(args, i, "load_id"), number_arg(require(args, i, "gamma"), i, "gamma")};
      checker.check_curtail(i, a);
      plan.actions.emplace_back(std::move(a));
    } else if (tool == "add_battery") {
      reject_unknown_keys(args, i, {"bus_id", "p_mw", "q_mvar", "s_max_mva"});
      std::string bus = string_arg(args, i, "bus_id");
      const auto s = optional_number(args, i, "s_max_mva");
      const auto p = optional_number(args, i, "p_mw");
      const auto q = optional_number(args, i, "q_mvar");
      AddBattery a = s ? caps.battery_defaults.sized_battery(bus, *s) : caps.battery_defaults.default_battery(bus);
      const std::string id = checker.add(i, a);
      plan.actions.emplace_back(std::move(a));
      if (p || q) {
        DispatchBattery d{id, p.value_or(0.0), q.value_or(0.0)};
        checker.check_dispatch(i, d);
        plan.actions.emplace_back(std::move(d));
      }
    } else if (tool == "dispatch_battery") {
      reject_unknown_keys(args, i, {"battery_id", "p_mw", "q_mvar"});
      DispatchBattery a{string_arg(args, i, "battery_id"), number_arg(require(args, i, "p_mw"), i, "p_mw"),
                        number_arg(require(args, i, "q_mvar"), i, "q_mvar")};
      checker.check_dispatch(i, a);
      plan.actions.emplace_back(std::move(a));
    } else {
      throw Error(ErrorCode::UnknownTool, fmt::format("action {}: unknown tool '{}'", i, tool));
    }
  }
  return plan;
}

std::string plan_to_tool_json(const Plan& plan) {
  json actions = json::array();
  // One call per action; add + dispatch stay separate so the parse is exact.
  for (const auto& a : plan.actions) actions.push_back(to_tool_call(a));
  json out;
  out["actions"] = std::move(actions);
  out["rationale"] = plan.rationale;
  return out.dump();
}

// ----------------------------------------------------------------- chat ---

LlmClientConfig LlmClientConfig::from_env(std::string endpoint, std::string model) {
  LlmClientConfig cfg;
  auto env = [](const char* name) -> std::string {
    const char* v = std::getenv(name);
    return v ? v : "";
  };
  cfg.endpoint = endpoint.empty() ? env("GRID_AGENT_LLM_ENDPOINT") : std::move(endpoint);
  cfg.model = model.empty() ? env("GRID_AGENT_LLM_MODEL") : std::move(model);
  return cfg;
}

void LlmClientConfig::validate() const {
  if (!(timeout_seconds > 0.0)) throw Error(ErrorCode::InvalidArguments, "LLM timeout must be positive");
  if (max_retries < 0) throw Error(ErrorCode::InvalidArguments, "LLM max_retries must be >= 0");
}

json chat_request_body(const ChatRequest& req) {
  json body;
  body["model"] = req.model;
  json messages = json::array();
  for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(messages);
  if (req.temperature) body["temperature"] = *req.temperature;
  if (req.thinking_budget) body["thinking_budget"] = *req.thinking_budget;
  return body;
}

std::string chat_response_text(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::TransportError, "response body is not JSON");
  try {
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw Error(ErrorCode::TransportError, "message content is not a string");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::TransportError, std::string("unexpected response shape: ") + e.what());
  }
}

namespace {

std::string call_with_retries(const ChatTransport& transport, const ChatRequest& req, int max_retries) {
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    try {
      return transport(req);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TransportError) throw;
      last_error = e.what();
    }
  }
  throw Error(ErrorCode::TransportError,
              fmt::format("giving up after {} attempt(s); last error: {}", max_retries + 1, last_error));
}

bool is_parse_error(ErrorCode code) {
  return code == ErrorCode::NoJsonFound || code == ErrorCode::SchemaMismatch || code == ErrorCode::UnknownTool ||
         code == ErrorCode::InvalidArguments;
}

}  // namespace

Plan plan_llm(const PlanRequest& req, const LlmClientConfig& cfg, const ChatTransport& transport) {
  cfg.validate();
  if (!transport) throw Error(ErrorCode::TransportError, "no transport configured");
  const Prompt prompt = build_prompt(req);
  const std::string id = cfg.model.empty() ? "llm" : cfg.model;

  ChatRequest chat;
  chat.model = cfg.model;
  chat.temperature = cfg.temperature;
  chat.thinking_budget = cfg.thinking_budget;
  chat.timeout_seconds = cfg.timeout_seconds;
  chat.messages = {{"system", prompt.system}, {"user", prompt.user}};

  std::string reply = call_with_retries(transport, chat, cfg.max_retries);
  try {
    return parse_tool_calls(reply, req.available_actions, id);
  } catch (const Error& e) {
    if (!is_parse_error(e.code())) throw;
    chat.messages.push_back({"assistant", reply});
    chat.messages.push_back({"user", fmt::format("Your previous response could not be used ({}). Reply again with "
                                                 "JSON only, exactly matching the output format.",
                                                 e.what())});
  }

  reply = call_with_retries(transport, chat, cfg.max_retries);
  try {
    return parse_tool_calls(reply, req.available_actions, id);
  } catch (const Error& e) {
    if (!is_parse_error(e.code())) throw;
    throw Error(ErrorCode::UnparseableAfterRepair, e.what());
  }
}

}  // namespace gridagent
