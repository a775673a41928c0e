#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridagent/actions.h"
#include "gridagent/kernels.h"
#include "gridagent/model.h"
#include "gridagent/powerflow.h"
#include "gridagent/representation.h"
#include "gridagent/violations.h"

namespace gridagent {

/// What a planner may touch, derived from the network at planning time.
struct Capabilities {
  struct SwitchCap {
    std::string id;
    std::string branch_id;
    std::string from_bus;
    std::string to_bus;
    bool closed = true;
  };
  struct LoadCap {
    std::string id;
    std::string bus_id;
    double p_mw = 0.0;
    double gamma = 0.0;
    double gamma_max = 0.0;
  };
  struct BatteryCap {
    std::string id;
    std::string bus_id;
    bool placed = false;
    double s_max_mva = 0.0;
    double p_max_mw = 0.0;
    double q_max_mvar = 0.0;
  };

  std::vector<SwitchCap> switches;
  std::vector<LoadCap> curtailable_loads;
  std::vector<BatteryCap> batteries;
  std::vector<std::string> bus_ids;
  int battery_budget_remaining = 0;
  ActionConfig battery_defaults;
};

Capabilities describe_capabilities(const Network& net, const ActionConfig& cfg = {});

inline constexpr std::string_view kPriorityPolicy =
    "(1) Topology reconfiguration: open or close switches first. "
    "(2) Battery deployment/dispatch: place batteries within the budget and dispatch them. "
    "(3) Load curtailment: curtail curtailable loads only as a last resort, with the smallest fraction that helps.";

struct PlanRequest {
  NetworkContext context;
  Capabilities available_actions;
  int t_max_remaining = 0;
  std::string priority_policy{kPriorityPolicy};
  std::vector<std::string> history;  // summaries of failed plans in this run

  // Planner-side state (not rendered into prompts).
  const Network* network = nullptr;
  ViolationReport report;
  int focus_hops = kDefaultFocusHops;
};

struct Plan {
  std::vector<Action> actions;
  std::string rationale;
  std::string planner_id;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual std::string id() const = 0;
  /// Throws gridagent::Error (NoImprovingPlan, TransportError, ...) when no
  /// plan can be produced.
  virtual Plan plan(const PlanRequest& req) = 0;
};

// ------------------------------------------------------------- heuristic ---

/// Evaluates candidate plans on scratch copies; nullopt marks a plan that is
/// invalid or whose power flow fails.
using SandboxEval = std::function<std::vector<std::optional<ViolationReport>>(const std::vector<std::vector<Action>>&)>;

class SandboxEvaluator {
 public:
  SandboxEvaluator(const Network& base, SolveOptions solve_opts, kernels::Execution batch = kernels::Execution::Parallel);

  std::optional<ViolationReport> evaluate(const std::vector<Action>& plan) const;
  std::vector<std::optional<ViolationReport>> evaluate_batch(const std::vector<std::vector<Action>>& plans) const;

  SandboxEval callback() const;

 private:
  const Network* base_;
  SolveOptions solve_opts_;
  kernels::Execution batch_;
};

/// Tiered search: switches (single, then best pair) within the focus radius;
/// a battery at the worst undervoltage bus with Q raised in 20% steps;
/// curtailment in 0.1 steps of loads downstream of overloads (and around the
/// worst undervoltage). Returns the first tier's plan that improves on
/// req.report. Throws NoImprovingPlan.
Plan plan_heuristic(const PlanRequest& req, const SandboxEval& eval);

class HeuristicPlanner : public Planner {
 public:
  explicit HeuristicPlanner(SolveOptions solve_opts = {}, kernels::Execution batch = kernels::Execution::Parallel)
      : solve_opts_(solve_opts), batch_(batch) {}
  std::string id() const override { return "heuristic"; }
  Plan plan(const PlanRequest& req) override;

 private:
  SolveOptions solve_opts_;
  kernels::Execution batch_;
};

// ------------------------------------------------------------------- LLM ---

struct Prompt {
  std::string system;
  std::string user;
};

Prompt build_prompt(const PlanRequest& req);

/// Text -> Plan. Pure: validates against the capability snapshot, tracking
/// batteries added earlier in the same plan. Throws NoJsonFound,
/// SchemaMismatch, UnknownTool or InvalidArguments.
Plan parse_tool_calls(std::string_view text, const Capabilities& caps, std::string planner_id = "llm");

/// Wire form of a plan: {"actions": [...], "rationale": "..."}.
std::string plan_to_tool_json(const Plan& plan);

struct ChatMessage {
  std::string role;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  std::optional<double> temperature;
  std::optional<int> thinking_budget;
  double timeout_seconds = 60.0;
};

/// Returns the assistant text. Throws Error(TransportError) on failure.
using ChatTransport = std::function<std::string(const ChatRequest&)>;

struct LlmClientConfig {
  std::string endpoint;
  std::string model;
  std::string api_key_env = "GRID_AGENT_LLM_API_KEY";  // variable name, never the key
  double timeout_seconds = 60.0;
  int max_retries = 2;
  std::optional<int> thinking_budget;
  std::optional<double> temperature;

  /// Reads GRID_AGENT_LLM_ENDPOINT and GRID_AGENT_LLM_MODEL; explicit
  /// non-empty arguments win.
  static LlmClientConfig from_env(std::string endpoint = {}, std::string model = {});
  /// Throws InvalidArguments on timeout <= 0 or retries < 0.
  void validate() const;
};

/// Chat-completion request body.
nlohmann::json chat_request_body(const ChatRequest& req);
/// First choice's message content. Throws TransportError on malformed input.
std::string chat_response_text(std::string_view body);

/// HTTPS POST to cfg.endpoint (bearer key from cfg.api_key_env).
ChatTransport make_http_transport(const LlmClientConfig& cfg);

/// Sends the prompt; on a parse failure re-prompts once with the diagnostic.
/// Each round retries the transport up to cfg.max_retries times.
/// Throws TransportError or UnparseableAfterRepair.
Plan plan_llm(const PlanRequest& req, const LlmClientConfig& cfg, const ChatTransport& transport);

class LlmPlanner : public Planner {
 public:
  LlmPlanner(LlmClientConfig cfg, ChatTransport transport) : cfg_(std::move(cfg)), transport_(std::move(transport)) {}
  std::string id() const override { return cfg_.model.empty() ? "llm" : cfg_.model; }
  Plan plan(const PlanRequest& req) override { return plan_llm(req, cfg_, transport_); }

 private:
  LlmClientConfig cfg_;
  ChatTransport transport_;
};

}  // namespace gridagent
