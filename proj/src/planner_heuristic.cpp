// Rule-based planner following the reconfigure -> battery -> curtail order.

#include <algorithm>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "gridagent/error.h"
#include "gridagent/planner.h"
#include "gridagent/topology.h"

namespace gridagent {

Capabilities describe_capabilities(const Network& net, const ActionConfig& cfg) {
  Capabilities caps;
  caps.battery_defaults = cfg;
  for (const auto& sw : net.switches()) {
    const Branch& br = net.branch(sw.branch_id);
    caps.switches.push_back({sw.id, br.id, br.from_bus, br.to_bus, sw.closed});
  }
  for (const auto& l : net.loads()) {
    if (l.curtailable) caps.curtailable_loads.push_back({l.id, l.bus_id, l.p_mw, l.gamma, l.gamma_max});
  }
  for (const auto& b : net.batteries()) {
    caps.batteries.push_back({b.id, b.bus_id, b.placed, b.s_max_mva, b.p_max_mw, b.q_max_mvar});
  }
  for (const auto& b : net.buses()) caps.bus_ids.push_back(b.id);
  caps.battery_budget_remaining = net.battery_budget() - net.placed_battery_count();
  return caps;
}

// -------------------------------------------------------------- sandbox ---

SandboxEvaluator::SandboxEvaluator(const Network& base, SolveOptions solve_opts, kernels::Execution batch)
    : base_(&base), solve_opts_(solve_opts), batch_(batch) {
  // Candidates run side by side; keep each solve single-threaded.
  if (batch_ == kernels::Execution::Parallel) solve_opts_.execution = kernels::Execution::Serial;
}

std::optional<ViolationReport> SandboxEvaluator::evaluate(const std::vector<Action>& plan) const {
  Network scratch = *base_;
  if (!apply_plan(scratch, plan).ok()) return std::nullopt;
  try {
    const PowerFlowSolution sol = solve(scratch, solve_opts_);
    if (!sol.converged) return std::nullopt;
    return analyze(scratch, sol);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<std::optional<ViolationReport>> SandboxEvaluator::evaluate_batch(
    const std::vector<std::vector<Action>>& plans) const {
  std::vector<std::optional<ViolationReport>> out(plans.size());
  const auto count = static_cast<std::ptrdiff_t>(plans.size());
  if (batch_ == kernels::Execution::Parallel) {
#pragma omp parallel for schedule(dynamic) if (count > 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = evaluate(plans[static_cast<std::size_t>(i)]);
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = evaluate(plans[static_cast<std::size_t>(i)]);
  }
  return out;
}

SandboxEval SandboxEvaluator::callback() const {
  return [this](const std::vector<std::vector<Action>>& plans) { return evaluate_batch(plans); };
}

// ------------------------------------------------------------ heuristic ---

namespace {

constexpr int kBatterySteps = 5;  // dispatch grid: 20% of s_max
constexpr double kGammaStep = 0.1;

struct Candidate {
  std::vector<Action> actions;
  ViolationReport report;
  std::string key;  // lowest element id in the plan, for tie-breaks
};

// (count, severity, #actions, element id), lower is better.
bool better(const Candidate& a, const Candidate& b) {
  if (a.report.size() != b.report.size()) return a.report.size() < b.report.size();
  if (std::abs(a.report.total_severity - b.report.total_severity) > kSeverityMargin) {
    return a.report.total_severity < b.report.total_severity;
  }
  if (a.actions.size() != b.actions.size()) return a.actions.size() < b.actions.size();
  return a.key < b.key;
}

bool has_violation(const ViolationReport& r, ViolationKind kind, std::string_view element) {
  return std::any_of(r.violations.begin(), r.violations.end(),
                     [&](const Violation& v) { return v.kind == kind && v.element == element; });
}

std::optional<Candidate> best_of(const std::vector<std::vector<Action>>& plans,
                                 const std::vector<std::optional<ViolationReport>>& reports,
                                 const std::vector<std::string>& keys) {
  std::optional<Candidate> best;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    if (!reports[i]) continue;
    Candidate c{plans[i], *reports[i], keys[i]};
    if (!best || better(c, *best)) best = std::move(c);
  }
  return best;
}

std::optional<Plan> tier_switches(const PlanRequest& req, const SandboxEval& eval, const std::vector<int>& dist) {
  const Network& net = *req.network;
  std::vector<const Switch*> focus;
  for (const auto& sw : net.switches()) {
    const Branch& br = net.branch(sw.branch_id);
    const int df = dist[*net.bus_index(br.from_bus)];
    const int dt = dist[*net.bus_index(br.to_bus)];
    const bool near = (df >= 0 && df <= req.focus_hops) || (dt >= 0 && dt <= req.focus_hops);
    if (near) focus.push_back(&sw);
  }
  if (focus.empty()) return std::nullopt;

  std::vector<std::vector<Action>> plans;
  std::vector<std::string> keys;
  for (const Switch* sw : focus) {
    plans.push_back({SetSwitch{sw->id, !sw->closed}});
    keys.push_back(sw->id);
  }
  auto best = best_of(plans, eval(plans), keys);

  if (focus.size() > 1 && !(best && best->report.empty())) {
    std::vector<std::vector<Action>> pairs;
    std::vector<std::string> pair_keys;
    for (std::size_t i = 0; i < focus.size(); ++i) {
      for (std::size_t j = i + 1; j < focus.size(); ++j) {
        pairs.push_back({SetSwitch{focus[i]->id, !focus[i]->closed}, SetSwitch{focus[j]->id, !focus[j]->closed}});
        pair_keys.push_back(std::min(focus[i]->id, focus[j]->id));
      }
    }
    auto best_pair = best_of(pairs, eval(pairs), pair_keys);
    if (best_pair && (!best || better(*best_pair, *best))) best = std::move(best_pair);
  }
  if (!best || !improves(req.report, best->report)) return std::nullopt;

  Plan plan;
  plan.actions = best->actions;
  std::vector<std::string> parts;
  for (const auto& a : plan.actions) parts.push_back(describe(a));
  plan.rationale = fmt::format("Reconfiguration: {} reduces violations from {} to {} (severity {:.4f} -> {:.4f}).",
                               fmt::join(parts, ", "), req.report.size(), best->report.size(),
                               req.report.total_severity, best->report.total_severity);
  return plan;
}

const Violation* worst_undervoltage(const ViolationReport& r) {
  const Violation* worst = nullptr;
  for (const auto& v : r.violations) {
    if (v.kind != ViolationKind::Undervoltage) continue;
    if (worst == nullptr || v.severity > worst->severity + kSeverityMargin ||
        (std::abs(v.severity - worst->severity) <= kSeverityMargin && v.element < worst->element)) {
      worst = &v;
    }
  }
  return worst;
}

enum class Support { Reactive, Active };

// Places (or re-dispatches) a battery at `bus`, raising Q (undervoltage) or
// P (overload relief) in 20% steps of s_max. Picks the first step that clears
// `target`; otherwise the best step.
std::optional<Plan> battery_at(const PlanRequest& req, const SandboxEval& eval, const std::string& bus, Support mode,
                               const Violation& target) {
  const Network& net = *req.network;
  const ActionConfig& cfg = req.available_actions.battery_defaults;

  std::vector<Action> prefix;
  std::string battery_id;
  double s_max = 0.0, p_max = 0.0, q_max = 0.0, q_now = 0.0, p_now = 0.0;
  for (const auto& b : net.batteries()) {
    if (b.placed && b.bus_id == bus) {
      battery_id = b.id;
      s_max = b.s_max_mva;
      p_max = b.p_max_mw;
      q_max = b.q_max_mvar;
      q_now = b.q_mvar;
      p_now = b.p_mw;
    }
  }
  if (battery_id.empty()) {
    if (net.placed_battery_count() >= net.battery_budget()) return std::nullopt;
    AddBattery add = cfg.default_battery(bus);
    battery_id = battery_id_for(net, bus);
    s_max = add.s_max_mva;
    p_max = add.p_max_mw;
    q_max = add.q_max_mvar;
    prefix.push_back(add);
  }

  const double held = mode == Support::Reactive ? p_now : q_now;
  const double now = mode == Support::Reactive ? q_now : p_now;
  const double cap = std::min(mode == Support::Reactive ? q_max : p_max,
                              std::sqrt(std::max(0.0, s_max * s_max - held * held)));
  std::vector<std::vector<Action>> plans;
  for (int step = 1; step <= kBatterySteps; ++step) {
    const double x = std::min(cap, step * s_max / kBatterySteps);
    if (x <= now + 1e-12) continue;
    auto plan = prefix;
    plan.push_back(mode == Support::Reactive ? DispatchBattery{battery_id, p_now, x} : DispatchBattery{battery_id, x, q_now});
    plans.push_back(std::move(plan));
    if (x >= cap) break;
  }
  if (plans.empty()) return std::nullopt;

  const auto reports = eval(plans);
  // First step that clears the target without creating anything new.
  std::optional<std::size_t> chosen;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    if (reports[i] && !has_violation(*reports[i], target.kind, target.element) &&
        compare(req.report, *reports[i]).introduced.empty()) {
      chosen = i;
      break;
    }
  }
  if (!chosen || !improves(req.report, *reports[*chosen])) {
    chosen.reset();
    for (std::size_t i = 0; i < plans.size(); ++i) {
      if (!reports[i]) continue;
      if (!chosen) {
        chosen = i;
        continue;
      }
      const Candidate a{plans[i], *reports[i], ""}, b{plans[*chosen], *reports[*chosen], ""};
      if (better(a, b)) chosen = i;
    }
  }
  if (!chosen || !improves(req.report, *reports[*chosen])) return std::nullopt;

  Plan plan;
  plan.actions = plans[*chosen];
  const auto& dispatch = std::get<DispatchBattery>(plan.actions.back());
  plan.rationale =
      mode == Support::Reactive
          ? fmt::format("Battery support: {} {} at bus {} (undervoltage {:.4f} pu) injecting {:.2f} Mvar; "
                        "violations {} -> {}.",
                        prefix.empty() ? "redispatch" : "place", battery_id, bus, *target.observed, dispatch.q_mvar,
                        req.report.size(), reports[*chosen]->size())
          : fmt::format("Battery support: {} {} at bus {} (receiving end of overloaded {}, {:.1f}%) injecting "
                        "{:.2f} MW; violations {} -> {}.",
                        prefix.empty() ? "redispatch" : "place", battery_id, bus, target.element,
                        *target.observed * 100.0, dispatch.p_mw, req.report.size(), reports[*chosen]->size());
  return plan;
}

std::vector<const Violation*> by_severity(const ViolationReport& r, ViolationKind kind) {
  std::vector<const Violation*> out;
  for (const auto& v : r.violations) {
    if (v.kind == kind) out.push_back(&v);
  }
  std::stable_sort(out.begin(), out.end(), [](const Violation* a, const Violation* b) {
    if (std::abs(a->severity - b->severity) > kSeverityMargin) return a->severity > b->severity;
    return a->element < b->element;
  });
  return out;
}

constexpr std::size_t kBatterySites = 3;  // candidate buses tried per kind

// Grid search over (P, Q) in 20% steps of s_max for every placed battery.
std::optional<Plan> redispatch(const PlanRequest& req, const SandboxEval& eval) {
  std::vector<std::vector<Action>> plans;
  std::vector<std::string> keys;
  for (const auto& b : req.network->batteries()) {
    if (!b.placed) continue;
    for (int i = -kBatterySteps; i <= kBatterySteps; ++i) {
      for (int k = -kBatterySteps; k <= kBatterySteps; ++k) {
        const double p = i * b.s_max_mva / kBatterySteps, q = k * b.s_max_mva / kBatterySteps;
        if (std::abs(p) > b.p_max_mw + 1e-12 || std::abs(q) > b.q_max_mvar + 1e-12) continue;
        if (p * p + q * q > b.s_max_mva * b.s_max_mva * (1.0 + 1e-12)) continue;
        if (std::abs(p - b.p_mw) < 1e-12 && std::abs(q - b.q_mvar) < 1e-12) continue;
        plans.push_back({DispatchBattery{b.id, p, q}});
        keys.push_back(b.id);
      }
    }
  }
  if (plans.empty()) return std::nullopt;
  auto best = best_of(plans, eval(plans), keys);
  if (!best || !improves(req.report, best->report)) return std::nullopt;
  Plan plan;
  plan.actions = best->actions;
  plan.rationale = fmt::format("Battery redispatch: {}; violations {} -> {} (severity {:.4f} -> {:.4f}).",
                               describe(plan.actions.front()), req.report.size(), best->report.size(),
                               req.report.total_severity, best->report.total_severity);
  return plan;
}

std::optional<Plan> tier_battery(const PlanRequest& req, const SandboxEval& eval, const PowerFlowSolution& sol) {
  const Network& net = *req.network;
  const auto uvs = by_severity(req.report, ViolationKind::Undervoltage);
  for (std::size_t i = 0; i < uvs.size() && i < kBatterySites; ++i) {
    if (auto p = battery_at(req, eval, uvs[i]->element, Support::Reactive, *uvs[i])) return p;
  }
  if (auto p = redispatch(req, eval)) return p;
  const auto thermals = by_severity(req.report, ViolationKind::Thermal);
  for (std::size_t i = 0; i < thermals.size() && i < kBatterySites; ++i) {
    const std::size_t k = *net.branch_index(thermals[i]->element);
    const Branch& br = net.branches()[k];
    const std::string& recv = sol.branches[k].p_from_mw >= 0.0 ? br.to_bus : br.from_bus;
    if (auto p = battery_at(req, eval, recv, Support::Active, *thermals[i])) return p;
  }
  return std::nullopt;
}

struct CurtailTarget {
  std::vector<const Load*> loads;  // largest first
  ViolationKind kind;
  std::string element;
};

std::vector<const Load*> sorted_curtailable(const Network& net, const std::vector<std::size_t>& buses) {
  std::set<std::string> bus_ids;
  for (auto i : buses) bus_ids.insert(net.buses()[i].id);
  std::vector<const Load*> out;
  for (const auto& l : net.loads()) {
    if (l.curtailable && bus_ids.contains(l.bus_id) && l.gamma < l.gamma_max - 1e-12 && l.p_mw > 0.0) out.push_back(&l);
  }
  std::stable_sort(out.begin(), out.end(), [](const Load* a, const Load* b) {
    if (a->p_mw != b->p_mw) return a->p_mw > b->p_mw;
    return a->id < b->id;
  });
  return out;
}

std::vector<std::size_t> within_hops(const Network& net, std::size_t bus, int hops) {
  const auto d = topology::hop_distances(topology::active_adjacency(net), {bus});
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] >= 0 && d[i] <= hops) out.push_back(i);
  }
  return out;
}

std::vector<CurtailTarget> curtail_targets(const PlanRequest& req, const PowerFlowSolution& sol) {
  const Network& net = *req.network;
  const topology::FeedTree tree = topology::feed_tree(net);
  std::vector<CurtailTarget> targets;

  for (const auto& v : req.report.violations) {
    if (v.kind != ViolationKind::Thermal) continue;
    const std::size_t k = *net.branch_index(v.element);
    int end = topology::downstream_end(net, tree, k);
    std::vector<std::size_t> area;
    if (end >= 0) {
      area = topology::subtree(tree, static_cast<std::size_t>(end));
    } else {
      // Meshed branch: take the receiving end by flow direction.
      const Branch& br = net.branches()[k];
      const std::string& recv = sol.branches[k].p_from_mw >= 0.0 ? br.to_bus : br.from_bus;
      area = within_hops(net, *net.bus_index(recv), req.focus_hops);
    }
    targets.push_back({sorted_curtailable(net, area), ViolationKind::Thermal, v.element});
  }

  if (const Violation* uv = worst_undervoltage(req.report)) {
    const std::size_t bus = *net.bus_index(uv->element);
    // Loads feeding through the same path: the whole feeder section below the
    // first branch out of the source, limited to the focus radius around the
    // bus, plus anything downstream of it.
    std::set<std::size_t> area;
    for (auto i : within_hops(net, bus, req.focus_hops)) area.insert(i);
    for (auto i : topology::subtree(tree, bus)) area.insert(i);
    targets.push_back({sorted_curtailable(net, {area.begin(), area.end()}), ViolationKind::Undervoltage, uv->element});
  }
  return targets;
}

std::optional<Plan> tier_curtail(const PlanRequest& req, const SandboxEval& eval, const PowerFlowSolution& sol) {
  std::vector<Action> plan_actions;
  std::optional<ViolationReport> last;
  std::set<std::string> used;

  for (const auto& target : curtail_targets(req, sol)) {
    if (last && !has_violation(*last, target.kind, target.element)) continue;
    bool cleared = false;
    for (const Load* load : target.loads) {
      if (used.contains(load->id)) continue;
      std::vector<std::vector<Action>> steps;
      for (int s = 1; s * kGammaStep <= load->gamma_max + 1e-9; ++s) {
        const double gamma = std::min(load->gamma_max, s * kGammaStep);
        if (gamma <= load->gamma + 1e-12) continue;
        auto trial = plan_actions;
        trial.push_back(CurtailLoad{load->id, gamma});
        steps.push_back(std::move(trial));
      }
      if (steps.empty()) continue;
      const auto reports = eval(steps);
      std::optional<std::size_t> pick;
      for (std::size_t i = 0; i < steps.size(); ++i) {
        if (!reports[i]) continue;
        pick = i;
        if (!has_violation(*reports[i], target.kind, target.element)) {
          cleared = true;
          break;
        }
      }
      if (!pick) continue;
      plan_actions = steps[*pick];
      last = reports[*pick];
      used.insert(load->id);
      if (cleared) break;
    }
  }
  if (plan_actions.empty() || !last || !improves(req.report, *last)) return std::nullopt;

  Plan plan;
  plan.actions = plan_actions;
  std::vector<std::string> parts;
  for (const auto& a : plan.actions) parts.push_back(describe(a));
  plan.rationale = fmt::format("Load curtailment (no reconfiguration or battery option improved the state): {}; "
                               "violations {} -> {}.",
                               fmt::join(parts, ", "), req.report.size(), last->size());
  return plan;
}

}  // namespace

Plan plan_heuristic(const PlanRequest& req, const SandboxEval& eval) {
  if (req.network == nullptr) throw Error(ErrorCode::InvalidArguments, "heuristic planner needs the network");
  if (req.report.empty()) throw Error(ErrorCode::NoImprovingPlan, "no violations to resolve");

  PowerFlowSolution sol;
  try {
    sol = solve(*req.network);
  } catch (const Error& e) {
    throw Error(ErrorCode::NoImprovingPlan, std::string("current state does not solve: ") + e.what());
  }
  if (!sol.converged) throw Error(ErrorCode::NoImprovingPlan, "current state does not solve");

  // Shedding load by de-energizing buses can lower the count; never propose it.
  std::set<std::string> already_dark;
  for (const auto& v : req.report.violations) {
    if (v.kind == ViolationKind::Disconnected) already_dark.insert(v.element);
  }
  const SandboxEval guarded = [&](const std::vector<std::vector<Action>>& plans) {
    auto reports = eval(plans);
    for (auto& r : reports) {
      if (!r) continue;
      for (const auto& v : r->violations) {
        if (v.kind == ViolationKind::Disconnected && !already_dark.contains(v.element)) {
          r.reset();
          break;
        }
      }
    }
    return reports;
  };

  const std::vector<int> dist = violation_distances(*req.network, req.report.violations);
  std::optional<Plan> plan = tier_switches(req, guarded, dist);
  if (!plan) plan = tier_battery(req, guarded, sol);
  if (!plan) plan = tier_curtail(req, guarded, sol);
  if (!plan) {
    throw Error(ErrorCode::NoImprovingPlan, fmt::format("no switch, battery or curtailment candidate improves on {} "
                                                        "violation(s)",
                                                        req.report.size()));
  }
  plan->planner_id = "heuristic";
  return *plan;
}

Plan HeuristicPlanner::plan(const PlanRequest& req) {
  if (req.network == nullptr) throw Error(ErrorCode::InvalidArguments, "heuristic planner needs the network");
  SandboxEvaluator evaluator(*req.network, solve_opts_, batch_);
  return plan_heuristic(req, evaluator.callback());
}

}  // namespace gridagent
