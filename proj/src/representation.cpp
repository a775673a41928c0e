#include "gridagent/representation.h"

#include <algorithm>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

#include "gridagent/topology.h"

namespace gridagent {

std::string_view to_string(ContextMode mode) {
  return mode == ContextMode::FullDetail ? "full_detail" : "semantic_graph";
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

namespace {

using topology::Adjacency;

struct ViolationIndex {
  std::map<std::string, const Violation*, std::less<>> bus;
  std::map<std::string, const Violation*, std::less<>> branch;

  explicit ViolationIndex(const ViolationReport& report) {
    for (const auto& v : report.violations) {
      (v.kind == ViolationKind::Thermal ? branch : bus)[v.element] = &v;
    }
  }
};

std::string violation_tag(const Violation& v) {
  switch (v.kind) {
    case ViolationKind::Undervoltage:
      return fmt::format("UNDERVOLTAGE (observed {:.4f} < limit {:.4f})", *v.observed, *v.limit);
    case ViolationKind::Overvoltage:
      return fmt::format("OVERVOLTAGE (observed {:.4f} > limit {:.4f})", *v.observed, *v.limit);
    case ViolationKind::Thermal:
      return fmt::format("THERMAL (loading {:.1f}% > 100%)", *v.observed * 100.0);
    case ViolationKind::Disconnected:
      return "DISCONNECTED";
  }
  return "";
}

std::string violation_line(const Violation& v) {
  const std::string_view what = v.kind == ViolationKind::Thermal ? "branch" : "bus";
  if (v.kind == ViolationKind::Disconnected) {
    return fmt::format("- disconnected {} {}: de-energized, severity {:.4f}\n", what, v.element, v.severity);
  }
  if (v.kind == ViolationKind::Thermal) {
    return fmt::format("- thermal {} {}: loading {:.1f}%, limit 100%, severity {:.4f}\n", what, v.element,
                       *v.observed * 100.0, v.severity);
  }
  return fmt::format("- {} {} {}: observed {:.4f} pu, limit {:.4f} pu, severity {:.4f}\n", to_string(v.kind), what,
                     v.element, *v.observed, *v.limit, v.severity);
}

std::string violations_section(const std::vector<Violation>& violations) {
  std::string out = fmt::format("## Violations ({})\n", violations.size());
  if (violations.empty()) return out + "none\n";
  for (const auto& v : violations) out += violation_line(v);
  return out;
}

std::string bus_line(const Network& net, const PowerFlowSolution& sol, std::size_t i, const ViolationIndex& vi) {
  const Bus& b = net.buses()[i];
  const BusResult& r = sol.buses[i];
  std::string status;
  auto it = vi.bus.find(b.id);
  if (it != vi.bus.end()) {
    status = violation_tag(*it->second);
  } else if (!b.in_service) {
    status = "out of service";
  } else {
    status = "ok";
  }
  if (!r.energized) {
    return fmt::format("bus {} [{}] {:g} kV de-energized band [{:.3f}, {:.3f}] {}\n", b.id, to_string(b.kind),
                       b.nominal_kv, b.v_min_pu, b.v_max_pu, status);
  }
  return fmt::format("bus {} [{}] {:g} kV v={:.4f} pu band [{:.3f}, {:.3f}] {}\n", b.id, to_string(b.kind),
                     b.nominal_kv, r.v_pu, b.v_min_pu, b.v_max_pu, status);
}

std::string branch_line(const Network& net, const PowerFlowSolution& sol, std::size_t k, const ViolationIndex& vi) {
  const Branch& br = net.branches()[k];
  const BranchFlow& f = sol.branches[k];
  std::string state;
  if (const Switch* sw = net.switch_for_branch(br.id)) {
    state = fmt::format("switch {} {}", sw->id, sw->closed ? "closed" : "open");
  } else {
    state = "fixed";
  }
  if (!br.in_service) state += ", out of service";
  auto it = vi.branch.find(br.id);
  const std::string flag = it != vi.branch.end() ? " " + violation_tag(*it->second) : "";
  if (!f.active) {
    return fmt::format("branch {}: {} -- {} inactive ({}) rating {:.3f} MVA{}\n", br.id, br.from_bus, br.to_bus, state,
                       br.s_max_mva, flag);
  }
  return fmt::format("branch {}: {} -- {} loading {:.1f}% ({:.3f}/{:.3f} MVA) ({}){}\n", br.id, br.from_bus, br.to_bus,
                     f.loading_percent, f.s_mva, br.s_max_mva, state, flag);
}

std::string load_line(const Load& l) {
  if (l.curtailable) {
    return fmt::format("load {} @ bus {}: p={:.3f} MW q={:.3f} Mvar curtailable gamma={:.2f} (max {:.2f})\n", l.id,
                       l.bus_id, l.effective_p_mw(), l.effective_q_mvar(), l.gamma, l.gamma_max);
  }
  return fmt::format("load {} @ bus {}: p={:.3f} MW q={:.3f} Mvar fixed\n", l.id, l.bus_id, l.effective_p_mw(),
                     l.effective_q_mvar());
}

std::string battery_line(const Battery& b) {
  if (!b.placed) return fmt::format("battery slot {} @ bus {}: unplaced\n", b.id, b.bus_id);
  return fmt::format("battery {} @ bus {}: p={:.3f} MW q={:.3f} Mvar (s_max {:.2f} MVA, p_max {:.2f}, q_max {:.2f})\n",
                     b.id, b.bus_id, b.p_mw, b.q_mvar, b.s_max_mva, b.p_max_mw, b.q_max_mvar);
}

std::string generator_line(const Generator& g) {
  return fmt::format("generator {} @ bus {}: p={:.3f} MW v_set={:.4f} pu q in [{:.2f}, {:.2f}] Mvar\n", g.id, g.bus_id,
                     g.p_mw, g.v_set_pu, g.q_min_mvar, g.q_max_mvar);
}

std::string budget_line(const Network& net) {
  return fmt::format("battery budget: {} of {} placed, {} remaining\n", net.placed_battery_count(), net.battery_budget(),
                     net.battery_budget() - net.placed_battery_count());
}

NetworkContext finish(ContextMode mode, std::string text, std::set<std::string> included, const ViolationReport& report) {
  NetworkContext ctx;
  ctx.mode = mode;
  ctx.token_estimate = estimate_tokens(text);
  ctx.text = std::move(text);
  ctx.included_elements = std::move(included);
  ctx.focus_violations = report.violations;
  return ctx;
}

}  // namespace

std::vector<int> violation_distances(const Network& net, const std::vector<Violation>& violations) {
  std::vector<std::size_t> sources;
  for (const auto& v : violations) {
    if (v.kind == ViolationKind::Thermal) {
      if (auto k = net.branch_index(v.element)) {
        const Branch& br = net.branches()[*k];
        sources.push_back(*net.bus_index(br.from_bus));
        sources.push_back(*net.bus_index(br.to_bus));
      }
    } else if (auto i = net.bus_index(v.element)) {
      sources.push_back(*i);
    }
  }
  return topology::hop_distances(topology::physical_adjacency(net), sources);
}

NetworkContext render_full(const Network& net, const PowerFlowSolution& sol, const ViolationReport& report) {
  const ViolationIndex vi(report);
  std::set<std::string> included;
  std::string text = fmt::format("# Network state (full detail)\nbase {:g} MVA, {} buses, {} branches, {} loads\n",
                                 net.base_mva(), net.buses().size(), net.branches().size(), net.loads().size());

  text += "## Buses\n";
  for (std::size_t i = 0; i < net.buses().size(); ++i) {
    text += bus_line(net, sol, i, vi);
    included.insert(net.buses()[i].id);
  }
  text += "## Branches\n";
  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    text += branch_line(net, sol, k, vi);
    included.insert(net.branches()[k].id);
  }
  for (const auto& s : net.switches()) included.insert(s.id);
  text += "## Loads\n";
  for (const auto& l : net.loads()) {
    text += load_line(l);
    included.insert(l.id);
  }
  text += "## Generators\n";
  for (const auto& g : net.generators()) {
    text += generator_line(g);
    included.insert(g.id);
  }
  text += "## Batteries\n" + budget_line(net);
  for (const auto& b : net.batteries()) {
    text += battery_line(b);
    included.insert(b.id);
  }
  text += violations_section(report.violations);
  return finish(ContextMode::FullDetail, std::move(text), std::move(included), report);
}

NetworkContext render_semantic_graph(const Network& net, const PowerFlowSolution& sol, const ViolationReport& report,
                                     int hops) {
  if (hops < 1) throw std::invalid_argument("focus radius must be at least 1 hop");
  const ViolationIndex vi(report);
  const std::size_t n = net.buses().size();

  if (report.empty()) {
    double p = 0.0, q = 0.0, vmin = 0.0, vmax = 0.0;
    bool first = true;
    for (const auto& l : net.loads()) {
      p += l.effective_p_mw();
      q += l.effective_q_mvar();
    }
    for (const auto& r : sol.buses) {
      if (!r.energized) continue;
      vmin = first ? r.v_pu : std::min(vmin, r.v_pu);
      vmax = first ? r.v_pu : std::max(vmax, r.v_pu);
      first = false;
    }
    std::string text = fmt::format(
        "# Network summary\n{} buses, {} branches, {} loads, total demand {:.3f} MW / {:.3f} Mvar, v range [{:.4f}, "
        "{:.4f}] pu, no violations\n",
        n, net.branches().size(), net.loads().size(), p, q, vmin, vmax);
    return finish(ContextMode::SemanticGraph, std::move(text), {}, report);
  }

  const std::vector<int> dist = violation_distances(net, report.violations);
  auto in_focus = [&](std::size_t i) { return dist[i] >= 0 && dist[i] <= hops; };
  auto bus_in_focus = [&](const std::string& id) { return in_focus(*net.bus_index(id)); };

  std::set<std::string> included;
  std::string text = fmt::format("# Network state (semantic graph, focus radius {} hops)\n", hops);
  std::size_t focus_count = 0;
  for (std::size_t i = 0; i < n; ++i) focus_count += in_focus(i) ? 1 : 0;
  text += fmt::format("{} buses, {} branches; {} buses within {} hops of {} violations shown\n", n,
                      net.branches().size(), focus_count, hops, report.size());
  text += violations_section(report.violations);

  text += "## Focus buses\n";
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_focus(i)) continue;
    std::string line = bus_line(net, sol, i, vi);
    line.insert(line.size() - 1, fmt::format(" [{} hops]", dist[i]));
    text += line;
    included.insert(net.buses()[i].id);
  }

  // Branches inside the focus area, violated branches, and switchable
  // branches touching it.
  text += "## Adjacency\n";
  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    const Branch& br = net.branches()[k];
    const bool from_in = bus_in_focus(br.from_bus);
    const bool to_in = bus_in_focus(br.to_bus);
    const bool show = (from_in && to_in) || vi.branch.contains(br.id) || (br.switchable && (from_in || to_in));
    if (!show) continue;
    text += branch_line(net, sol, k, vi);
    included.insert(br.id);
    if (const Switch* sw = net.switch_for_branch(br.id)) included.insert(sw->id);
  }

  text += "## Loads, generators and batteries in focus\n";
  for (const auto& l : net.loads()) {
    if (!bus_in_focus(l.bus_id)) continue;
    text += load_line(l);
    included.insert(l.id);
  }
  for (const auto& g : net.generators()) {
    if (!bus_in_focus(g.bus_id)) continue;
    text += generator_line(g);
    included.insert(g.id);
  }
  text += budget_line(net);
  for (const auto& b : net.batteries()) {
    if (!bus_in_focus(b.bus_id)) continue;
    text += battery_line(b);
    included.insert(b.id);
  }

  // Healthy sections: components of the physical graph restricted to
  // out-of-focus buses.
  const Adjacency adj = topology::physical_adjacency(net);
  std::vector<int> section(n, -1);
  std::vector<std::vector<std::size_t>> sections;
  for (std::size_t s = 0; s < n; ++s) {
    if (in_focus(s) || section[s] >= 0) continue;
    const int id = static_cast<int>(sections.size());
    sections.emplace_back();
    std::vector<std::size_t> stack{s};
    section[s] = id;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      sections.back().push_back(u);
      for (const auto& e : adj[u]) {
        if (!in_focus(e.to) && section[e.to] < 0) {
          section[e.to] = id;
          stack.push_back(e.to);
        }
      }
    }
    std::sort(sections.back().begin(), sections.back().end());
  }

  std::vector<double> bus_p(n, 0.0), bus_q(n, 0.0);
  for (const auto& l : net.loads()) {
    const std::size_t i = *net.bus_index(l.bus_id);
    bus_p[i] += l.effective_p_mw();
    bus_q[i] += l.effective_q_mvar();
  }
  text += fmt::format("## Pruned healthy sections ({})\n", sections.size());
  for (const auto& sec : sections) {
    double p = 0.0, q = 0.0, worst = 0.0;
    bool any_energized = false;
    for (std::size_t i : sec) {
      p += bus_p[i];
      q += bus_q[i];
      if (sol.buses[i].energized) {
        worst = any_energized ? std::min(worst, sol.buses[i].v_pu) : sol.buses[i].v_pu;
        any_energized = true;
      }
    }
    std::string attach;
    for (std::size_t i : sec) {
      for (const auto& e : adj[i]) {
        if (in_focus(e.to)) {
          attach = fmt::format(", attached to bus {} via {}", net.buses()[e.to].id, net.branches()[e.branch].id);
          break;
        }
      }
      if (!attach.empty()) break;
    }
    const std::string worst_text = any_energized ? fmt::format("{:.4f} pu", worst) : std::string("n/a");
    text += fmt::format("- {} buses from bus {}{}: load {:.3f} MW / {:.3f} Mvar, worst v {}\n", sec.size(),
                        net.buses()[sec.front()].id, attach, p, q, worst_text);
  }
  return finish(ContextMode::SemanticGraph, std::move(text), std::move(included), report);
}

ContextMode choose_mode(const Network& net, const PowerFlowSolution& sol, const ViolationReport& report,
                        std::size_t budget) {
  return render_full(net, sol, report).token_estimate <= budget ? ContextMode::FullDetail : ContextMode::SemanticGraph;
}

NetworkContext render_context(const Network& net, const PowerFlowSolution& sol, const ViolationReport& report,
                              std::size_t budget, int hops) {
  NetworkContext full = render_full(net, sol, report);
  if (full.token_estimate <= budget) return full;
  return render_semantic_graph(net, sol, report, hops);
}

}  // namespace gridagent
