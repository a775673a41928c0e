#include "gridagent/harness.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "gridagent/error.h"
#include "gridagent/powerflow.h"

namespace gridagent {

using nlohmann::json;

// ------------------------------------------------------------- scenarios ---

NetworkData apply_perturbations(NetworkData data, const std::vector<Perturbation>& perturbations) {
  auto find_branch = [&](const std::string& id) -> Branch& {
    for (auto& b : data.branches) {
      if (b.id == id) return b;
    }
    throw Error(ErrorCode::UnknownElement, "scenario references unknown branch '" + id + "'");
  };
  for (const auto& p : perturbations) {
    if (const auto* s = std::get_if<ScaleLoad>(&p)) {
      for (auto& l : data.loads) {
        l.p_mw *= s->factor;
        l.q_mvar *= s->factor;
      }
    } else if (const auto* o = std::get_if<OpenBranch>(&p)) {
      find_branch(o->branch_id).in_service = false;
    } else if (const auto* d = std::get_if<DerateBranch>(&p)) {
      Branch& b = find_branch(d->branch_id);
      b.s_max_mva *= d->factor;
      b.i_max_ka *= d->factor;
    } else if (const auto* f = std::get_if<ForceSwitch>(&p)) {
      auto it = std::find_if(data.switches.begin(), data.switches.end(),
                             [&](const Switch& sw) { return sw.id == f->switch_id; });
      if (it == data.switches.end()) {
        throw Error(ErrorCode::UnknownElement, "scenario references unknown switch '" + f->switch_id + "'");
      }
      it->closed = f->closed;
    }
  }
  return data;
}

CaseDocument scenario_case(const Scenario& s) {
  CaseDocument base = load_case(s.base);
  CaseDocument doc;
  doc.network = apply_perturbations(apply_overlay(base.network, base.scenario), s.perturbations);
  return doc;
}

Network scenario_network(const Scenario& s) { return network_from_case(scenario_case(s)); }

namespace {

json perturbation_json(const Perturbation& p) {
  if (const auto* s = std::get_if<ScaleLoad>(&p)) return {{"type", "scale_load"}, {"factor", s->factor}};
  if (const auto* o = std::get_if<OpenBranch>(&p)) return {{"type", "open_branch"}, {"id", o->branch_id}};
  if (const auto* d = std::get_if<DerateBranch>(&p)) {
    return {{"type", "derate_branch"}, {"id", d->branch_id}, {"factor", d->factor}};
  }
  const auto& f = std::get<ForceSwitch>(p);
  return {{"type", "force_switch"}, {"id", f.switch_id}, {"closed", f.closed}};
}

Perturbation perturbation_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "scale_load") return ScaleLoad{j.at("factor").get<double>()};
  if (type == "open_branch") return OpenBranch{j.at("id").get<std::string>()};
  if (type == "derate_branch") return DerateBranch{j.at("id").get<std::string>(), j.at("factor").get<double>()};
  if (type == "force_switch") return ForceSwitch{j.at("id").get<std::string>(), j.at("closed").get<bool>()};
  throw Error(ErrorCode::SchemaError, "unknown perturbation type '" + type + "'");
}

json counts_json(const ViolationCounts& c) {
  return {{"undervoltage", c.undervoltage},
          {"overvoltage", c.overvoltage},
          {"thermal", c.thermal},
          {"disconnected", c.disconnected}};
}

ViolationCounts counts_from_json(const json& j) {
  return {j.value("undervoltage", 0), j.value("overvoltage", 0), j.value("thermal", 0), j.value("disconnected", 0)};
}

}  // namespace

void to_json(json& j, const Scenario& s) {
  json ps = json::array();
  for (const auto& p : s.perturbations) ps.push_back(perturbation_json(p));
  j = json{{"name", s.name}, {"base", s.base}, {"perturbations", std::move(ps)}};
  if (s.expected_violation_profile) {
    j["expected_violation_profile"] = {{"total", s.expected_violation_profile->total},
                                       {"counts", counts_json(s.expected_violation_profile->counts)}};
  }
}

void from_json(const json& j, Scenario& s) {
  try {
    s.name = j.at("name").get<std::string>();
    s.base = j.at("base").get<std::string>();
    s.perturbations.clear();
    for (const auto& p : j.value("perturbations", json::array())) s.perturbations.push_back(perturbation_from_json(p));
    s.expected_violation_profile.reset();
    if (auto it = j.find("expected_violation_profile"); it != j.end() && !it->is_null()) {
      s.expected_violation_profile = ViolationProfile{it->at("total").get<int>(), counts_from_json(it->at("counts"))};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed scenario: ") + e.what());
  }
}

// -------------------------------------------------------------- generator ---

namespace {

bool meets(const ViolationReport& r, const ScenarioTarget& t) {
  if (static_cast<int>(r.size()) < t.count) return false;
  for (auto k : t.kinds) {
    if (r.counts.of(k) == 0) return false;
  }
  for (const auto& [k, n] : t.min_by_kind) {
    if (r.counts.of(k) < n) return false;
  }
  return true;
}

int floor_of(const ScenarioTarget& t, ViolationKind k) {
  auto it = t.min_by_kind.find(k);
  int n = it == t.min_by_kind.end() ? 0 : it->second;
  if (n == 0 && t.kinds.contains(k)) n = 1;
  return n;
}

// Portable Fisher-Yates (std::shuffle's sequence is library-specific).
template <class T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

struct Evaluated {
  Network net;
  PowerFlowSolution sol;
  ViolationReport report;
};

std::optional<Evaluated> evaluate(const NetworkData& base, const std::vector<Perturbation>& ps) {
  try {
    Network net = build_network(apply_perturbations(base, ps));
    PowerFlowSolution sol = solve(net);
    if (!sol.converged) return std::nullopt;
    ViolationReport rep = analyze(net, sol);
    return Evaluated{std::move(net), std::move(sol), std::move(rep)};
  } catch (const Error&) {
    return std::nullopt;
  }
}

int isolated_count(const NetworkData& data) {
  const Network net = build_network(data);
  int n = 0;
  for (const auto& island : find_islands(net)) {
    if (!island.energized) n += static_cast<int>(island.bus_ids.size());
  }
  return n;
}

// Branch openings isolating at least `need` buses: the single branch with the
// smallest sufficient cut, else greedily the largest cuts.
std::vector<Perturbation> choose_openings(const NetworkData& base, int need, std::mt19937_64& rng) {
  std::vector<Perturbation> out;
  NetworkData cur = base;
  for (int round = 0; round < 4 && isolated_count(cur) < need; ++round) {
    std::vector<std::string> cand;
    for (const auto& b : cur.branches) {
      if (b.in_service && !b.switchable) cand.push_back(b.id);
    }
    seeded_shuffle(cand, rng);
    const int have = isolated_count(cur);
    std::optional<std::pair<int, std::string>> best_enough, best_any;
    for (const auto& id : cand) {
      NetworkData trial = apply_perturbations(cur, {OpenBranch{id}});
      const int n = isolated_count(trial);
      if (n <= have) continue;
      if (n >= need && (!best_enough || n < best_enough->first)) best_enough = {n, id};
      if (!best_any || n > best_any->first) best_any = {n, id};
    }
    const auto& pick = best_enough ? best_enough : best_any;
    if (!pick) break;
    out.push_back(OpenBranch{pick->second});
    cur = apply_perturbations(cur, {out.back()});
  }
  return out;
}

// Derates `k` of the most loaded healthy branches just past their limit.
std::vector<Perturbation> choose_derates(const Evaluated& ev, int k, std::mt19937_64& rng) {
  std::vector<std::pair<double, std::string>> loaded;
  for (std::size_t i = 0; i < ev.net.branches().size(); ++i) {
    const auto& f = ev.sol.branches[i];
    const double frac = f.loading_percent / 100.0;
    if (f.active && frac > 0.1 && frac <= 1.0) loaded.emplace_back(frac, ev.net.branches()[i].id);
  }
  std::sort(loaded.begin(), loaded.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const std::size_t window = std::min(loaded.size(), static_cast<std::size_t>(2 * std::max(k, 1)));
  std::vector<std::pair<double, std::string>> pool(loaded.begin(), loaded.begin() + static_cast<std::ptrdiff_t>(window));
  seeded_shuffle(pool, rng);
  std::vector<Perturbation> out;
  for (int i = 0; i < k && i < static_cast<int>(pool.size()); ++i) {
    const double frac = pool[static_cast<std::size_t>(i)].first;
    double factor = std::floor(frac * 10.0) / 10.0;
    if (factor >= frac) factor -= 0.1;  // must end strictly above 100 %
    if (factor < 0.1 - 1e-12) continue;
    out.push_back(DerateBranch{pool[static_cast<std::size_t>(i)].second, std::round(factor * 10.0) / 10.0});
  }
  return out;
}

}  // namespace

Scenario generate_scenario(const std::string& base_name, const Network& base, const ScenarioTarget& target,
                           std::uint64_t seed, const GeneratorOptions& opts, std::string name) {
  if (target.count < 1) throw Error(ErrorCode::InvalidArguments, "target count must be >= 1");
  std::mt19937_64 rng(seed);
  const NetworkData& data = base.data();
  const bool thermal_ok = opts.allow_derate && (target.kinds.empty() || target.kinds.contains(ViolationKind::Thermal) ||
                                                target.min_by_kind.contains(ViolationKind::Thermal));

  std::vector<Perturbation> fixed;
  const int need_disc = floor_of(target, ViolationKind::Disconnected);
  if (need_disc > 0) {
    if (!opts.allow_open) throw Error(ErrorCode::TargetUnreachable, "disconnections need branch openings");
    fixed = choose_openings(data, need_disc, rng);
  }

  auto finish = [&](std::vector<Perturbation> ps, const ViolationReport& rep) {
    Scenario s;
    s.name = name.empty() ? fmt::format("{}-{}-s{}", base_name, target.count, seed) : std::move(name);
    s.base = base_name;
    s.perturbations = std::move(ps);
    s.expected_violation_profile = ViolationProfile{static_cast<int>(rep.size()), rep.counts};
    return s;
  };

  const int need_thermal = floor_of(target, ViolationKind::Thermal);
  std::optional<std::pair<std::vector<Perturbation>, Evaluated>> last_viable;
  const int steps = static_cast<int>(std::floor((opts.max_load_scale - 1.0) * 10.0 + 1e-9));
  for (int s = 0; s <= steps; ++s) {
    std::vector<Perturbation> ps = fixed;
    const double factor = std::round((1.0 + 0.1 * s) * 10.0) / 10.0;
    if (s > 0) ps.push_back(ScaleLoad{factor});
    auto ev = evaluate(data, ps);
    if (!ev) break;  // past the loadability limit
    if (meets(ev->report, target)) return finish(ps, ev->report);

    // Thermal floors are met by derating at the current stress level.
    const int deficit = need_thermal - ev->report.counts.thermal;
    if (thermal_ok && deficit > 0) {
      auto trial = ps;
      for (auto& d : choose_derates(*ev, deficit, rng)) trial.push_back(std::move(d));
      if (auto ev2 = evaluate(data, trial); ev2 && meets(ev2->report, target)) return finish(trial, ev2->report);
    }
    last_viable.emplace(std::move(ps), std::move(*ev));
  }

  // Scaling alone ran out; fill the remaining count with derates.
  if (thermal_ok && last_viable) {
    auto& [ps, ev] = *last_viable;
    const int deficit = std::max(target.count - static_cast<int>(ev.report.size()),
                                 need_thermal - ev.report.counts.thermal);
    auto trial = ps;
    for (auto& d : choose_derates(ev, deficit, rng)) trial.push_back(std::move(d));
    if (auto ev2 = evaluate(data, trial); ev2 && meets(ev2->report, target)) return finish(trial, ev2->report);
  }
  throw Error(ErrorCode::TargetUnreachable,
              fmt::format("no perturbation of '{}' within load scale {:.1f} reaches {} violation(s)", base_name,
                          opts.max_load_scale, target.count));
}

const std::vector<ScenarioPreset>& scenario_presets() {
  using K = ViolationKind;
  static const std::vector<ScenarioPreset> presets = {
      {"case30_light", "ieee30", {5, {K::Undervoltage, K::Thermal}, {{K::Undervoltage, 2}, {K::Thermal, 3}}}, 30},
      {"case30_medium", "ieee30", {1, {K::Thermal}, {}}, 31},
      {"cigre_mv_severe", "cigre_mv", {14, {K::Undervoltage, K::Thermal}, {}}, 14},
      {"cigre_mv_disconnected", "cigre_mv", {5, {K::Disconnected}, {{K::Disconnected, 5}}}, 5},
      {"ieee69_large_loads", "ieee69", {18, {K::Undervoltage}, {}}, 18},
      {"ieee69_medium_loads", "ieee69", {29, {K::Undervoltage}, {}}, 29},
      {"ieee69_disconnected", "ieee69", {13, {K::Disconnected}, {{K::Disconnected, 13}}}, 13},
  };
  return presets;
}

const ScenarioPreset& scenario_preset(std::string_view name) {
  for (const auto& p : scenario_presets()) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::UnknownCase, fmt::format("unknown scenario preset '{}'", name));
}

Scenario build_preset(const ScenarioPreset& preset) {
  return generate_scenario(preset.base, builtin_network(preset.base), preset.target, preset.seed, {}, preset.name);
}

// -------------------------------------------------------------- benchmark ---

RunRecord run_scenario(const Scenario& scenario, Planner& planner, const WorkflowOptions& opts) {
  RunRecord rec;
  rec.scenario = scenario;
  rec.initial_case = scenario_case(scenario);
  const Network net = network_from_case(rec.initial_case);
  rec.result = run(net, planner, opts);
  return rec;
}

namespace {

BenchmarkRow row_for(const RunRecord& rec, int repetition) {
  const ResolutionResult& r = rec.result;
  BenchmarkRow row;
  row.scenario = rec.scenario.name;
  row.repetition = repetition;
  row.status = std::string(to_string(r.status));
  row.success = r.metrics.success;
  row.initial_violations = static_cast<int>(r.initial_report.size());
  row.final_violations = static_cast<int>(r.final_report.size());
  row.iterations = r.iterations;
  row.actions = r.metrics.total_actions;
  row.action_efficiency = r.metrics.action_efficiency;
  row.coordination_score = r.metrics.coordination_score;
  row.runtime_seconds = r.wall_time_seconds;
  if (!row.success && !r.attempts.empty()) row.failure = r.attempts.back().detail;
  return row;
}

}  // namespace

void aggregate(BenchmarkReport& report) {
  const auto n = static_cast<double>(report.rows.size());
  report.success_rate = 0.0;
  report.mean_runtime_seconds = report.mean_iterations = report.mean_actions = 0.0;
  report.mean_action_efficiency.reset();
  if (report.rows.empty()) return;
  double eff_sum = 0.0;
  int eff_n = 0;
  for (const auto& r : report.rows) {
    report.success_rate += r.success ? 1.0 : 0.0;
    report.mean_runtime_seconds += r.runtime_seconds;
    report.mean_iterations += r.iterations;
    report.mean_actions += r.actions;
    if (r.action_efficiency) {
      eff_sum += *r.action_efficiency;
      ++eff_n;
    }
  }
  report.success_rate /= n;
  report.mean_runtime_seconds /= n;
  report.mean_iterations /= n;
  report.mean_actions /= n;
  if (eff_n > 0) report.mean_action_efficiency = eff_sum / eff_n;
}

BenchmarkReport run_benchmark(const std::vector<Scenario>& suite, const PlannerFactory& make_planner,
                              const BenchmarkOptions& opts) {
  const int reps = std::max(opts.repetitions, 1);
  const auto total = static_cast<std::ptrdiff_t>(suite.size()) * reps;
  std::vector<std::optional<RunRecord>> records(static_cast<std::size_t>(total));
  std::vector<std::string> setup_errors(static_cast<std::size_t>(total));

  auto one = [&](std::ptrdiff_t i) {
    const auto& scenario = suite[static_cast<std::size_t>(i / reps)];
    try {
      auto planner = make_planner();
      records[static_cast<std::size_t>(i)] = run_scenario(scenario, *planner, opts.workflow);
    } catch (const std::exception& e) {
      setup_errors[static_cast<std::size_t>(i)] = e.what();
    }
  };
#pragma omp parallel for schedule(dynamic) num_threads(std::max(opts.jobs, 1)) if (opts.jobs > 1)
  for (std::ptrdiff_t i = 0; i < total; ++i) one(i);

  BenchmarkReport report;
  if (auto p = make_planner()) report.planner = p->id();
  for (std::ptrdiff_t i = 0; i < total; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const int rep = static_cast<int>(i % reps);
    if (records[idx]) {
      report.rows.push_back(row_for(*records[idx], rep));
      if (opts.on_run) opts.on_run(*records[idx], rep);
    } else {
      BenchmarkRow row;
      row.scenario = suite[static_cast<std::size_t>(i / reps)].name;
      row.repetition = rep;
      row.status = std::string(to_string(RunStatus::Failed));
      row.failure = setup_errors[idx];
      report.rows.push_back(std::move(row));
    }
  }
  aggregate(report);
  return report;
}

json to_json(const BenchmarkReport& r, bool include_timing) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j{{"scenario", row.scenario},
           {"repetition", row.repetition},
           {"status", row.status},
           {"success", row.success},
           {"initial_violations", row.initial_violations},
           {"final_violations", row.final_violations},
           {"iterations", row.iterations},
           {"actions", row.actions},
           {"action_efficiency", row.action_efficiency ? json(*row.action_efficiency) : json(nullptr)},
           {"coordination_score", row.coordination_score},
           {"failure", row.failure}};
    if (include_timing) j["runtime_seconds"] = row.runtime_seconds;
    rows.push_back(std::move(j));
  }
  json summary{{"runs", r.rows.size()},
               {"success_rate", r.success_rate},
               {"mean_iterations", r.mean_iterations},
               {"mean_actions", r.mean_actions},
               {"mean_action_efficiency", r.mean_action_efficiency ? json(*r.mean_action_efficiency) : json(nullptr)}};
  if (include_timing) summary["mean_runtime_seconds"] = r.mean_runtime_seconds;
  return {{"planner", r.planner}, {"rows", std::move(rows)}, {"summary", std::move(summary)}};
}

std::string format_table(const BenchmarkReport& r, bool include_timing) {
  std::string out = fmt::format("{:<26} {:>3} {:<10} {:>6} {:>6} {:>5} {:>7} {:>6} {:>6}", "scenario", "rep", "status",
                                "v0", "v_end", "iter", "actions", "eff", "coord");
  if (include_timing) out += fmt::format(" {:>9}", "time_s");
  out += "\n";
  for (const auto& row : r.rows) {
    out += fmt::format("{:<26} {:>3} {:<10} {:>6} {:>6} {:>5} {:>7} {:>6} {:>6.2f}", row.scenario, row.repetition,
                       row.status, row.initial_violations, row.final_violations, row.iterations, row.actions,
                       row.action_efficiency ? fmt::format("{:.2f}", *row.action_efficiency) : "-",
                       row.coordination_score);
    if (include_timing) out += fmt::format(" {:>9.3f}", row.runtime_seconds);
    out += "\n";
  }
  out += fmt::format("success rate {:.1f}%, mean iterations {:.2f}, mean actions {:.2f}, mean efficiency {}",
                     r.success_rate * 100.0, r.mean_iterations, r.mean_actions,
                     r.mean_action_efficiency ? fmt::format("{:.2f}", *r.mean_action_efficiency) : "-");
  if (include_timing) out += fmt::format(", mean runtime {:.3f} s", r.mean_runtime_seconds);
  return out + "\n";
}

// ----------------------------------------------------------------- export ---

json run_record_to_json(const RunRecord& r) {
  return {{"scenario", r.scenario},
          {"initial_case", json::parse(serialize_case(r.initial_case))},
          {"result", to_json(r.result, true)}};
}

namespace {

ResolutionResult result_from_json(const json& j) {
  ResolutionResult r;
  const std::string status = j.at("status").get<std::string>();
  for (auto s : {RunStatus::Running, RunStatus::Resolved, RunStatus::Exhausted, RunStatus::Failed}) {
    if (to_string(s) == status) r.status = s;
  }
  r.planner_id = j.value("planner_id", "");
  r.iterations = j.at("iterations").get<int>();
  r.wall_time_seconds = j.value("wall_time_seconds", 0.0);
  r.initial_report = j.at("initial_report").get<ViolationReport>();
  r.final_report = j.at("final_report").get<ViolationReport>();
  for (const auto& a : j.at("accepted_actions")) {
    r.accepted_actions.push_back({a.at("iteration").get<int>(), action_from_json(a.at("action"))});
  }
  for (const auto& a : j.at("attempts")) {
    Attempt at;
    at.iteration = a.at("iteration").get<int>();
    at.plan.planner_id = a.value("planner_id", "");
    at.plan.rationale = a.value("rationale", "");
    for (const auto& x : a.at("actions")) at.plan.actions.push_back(action_from_json(x));
    const std::string outcome = a.at("outcome").get<std::string>();
    for (auto o : {AttemptOutcome::Accepted, AttemptOutcome::RolledBack, AttemptOutcome::Aborted,
                   AttemptOutcome::PlannerError}) {
      if (to_string(o) == outcome) at.outcome = o;
    }
    at.executed = a.value("executed", std::size_t{0});
    at.detail = a.value("detail", "");
    at.before = a.at("before").get<ViolationReport>();
    at.after = a.at("after").get<ViolationReport>();
    if (a.value("context_mode", "") == to_string(ContextMode::SemanticGraph)) at.context_mode = ContextMode::SemanticGraph;
    at.context_tokens = a.value("context_tokens", std::size_t{0});
    if (a.contains("effectiveness")) {
      const json& e = a.at("effectiveness");
      at.effectiveness.resolved_count = e.value("resolved_count", 0);
      at.effectiveness.introduced_count = e.value("introduced_count", 0);
      at.effectiveness.actions_used = e.value("actions_used", 0);
      at.effectiveness.by_type = e.value("by_type", std::map<std::string, int>{});
    }
    at.resolved_by_action = a.value("resolved_by_action", std::vector<std::vector<std::string>>{});
    r.attempts.push_back(std::move(at));
  }
  r.metrics = j.at("metrics").get<RunMetrics>();
  r.explanation = j.value("explanation", "");
  r.network = network_from_case(parse_case_json(j.at("network").dump()));
  return r;
}

}  // namespace

RunRecord run_record_from_json(const json& j) {
  try {
    RunRecord r;
    r.scenario = j.at("scenario").get<Scenario>();
    r.initial_case = parse_case_json(j.at("initial_case").dump());
    r.result = result_from_json(j.at("result"));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed run record: ") + e.what());
  }
}

bool TrainingRecord::operator==(const TrainingRecord& o) const {
  return scenario == o.scenario && initial_case == o.initial_case && initial_report == o.initial_report &&
         actions == o.actions && rationale == o.rationale && explanation == o.explanation && metrics == o.metrics &&
         final_violation_fingerprint == o.final_violation_fingerprint &&
         final_network_fingerprint == o.final_network_fingerprint && prompt.system == o.prompt.system &&
         prompt.user == o.prompt.user && assistant == o.assistant;
}

std::optional<TrainingRecord> make_training_record(const RunRecord& run, const WorkflowOptions& opts) {
  const ResolutionResult& res = run.result;
  if (res.status != RunStatus::Resolved) return std::nullopt;

  TrainingRecord t;
  t.scenario = run.scenario.name;
  t.initial_case = run.initial_case;
  t.initial_report = res.initial_report;
  std::vector<std::string> rationales;
  for (const auto& a : res.accepted_actions) t.actions.push_back(a.action);
  for (const auto& at : res.attempts) {
    if (at.outcome == AttemptOutcome::Accepted && !at.plan.rationale.empty()) rationales.push_back(at.plan.rationale);
  }
  t.rationale = fmt::format("{}", fmt::join(rationales, " "));
  t.explanation = res.explanation;
  t.metrics = res.metrics;
  t.final_violation_fingerprint = fingerprint_hex(res.final_report.fingerprint);
  t.final_network_fingerprint = fingerprint_hex(network_fingerprint(res.network));

  // The prompt a planner would have seen for the initial state.
  const Network net = network_from_case(run.initial_case);
  const PowerFlowSolution sol = solve(net, opts.solve);
  PlanRequest req;
  req.report = analyze(net, sol);
  req.context = render_context(net, sol, req.report, opts.token_budget, opts.focus_hops);
  req.available_actions = describe_capabilities(net, opts.actions);
  req.t_max_remaining = opts.t_max;
  req.focus_hops = opts.focus_hops;
  t.prompt = build_prompt(req);
  t.assistant = plan_to_tool_json(Plan{t.actions, t.rationale, res.planner_id});
  return t;
}

json to_json(const TrainingRecord& r) {
  json actions = json::array();
  for (const auto& a : r.actions) actions.push_back(action_to_json(a));
  return {{"scenario", r.scenario},
          {"initial_case", json::parse(serialize_case(r.initial_case))},
          {"initial_report", r.initial_report},
          {"actions", std::move(actions)},
          {"rationale", r.rationale},
          {"explanation", r.explanation},
          {"metrics", r.metrics},
          {"final_violation_fingerprint", r.final_violation_fingerprint},
          {"final_network_fingerprint", r.final_network_fingerprint},
          {"prompt", {{"system", r.prompt.system}, {"user", r.prompt.user}}},
          {"assistant", r.assistant}};
}

TrainingRecord training_record_from_json(const json& j) {
  try {
    TrainingRecord t;
    t.scenario = j.at("scenario").get<std::string>();
    t.initial_case = parse_case_json(j.at("initial_case").dump());
    t.initial_report = j.at("initial_report").get<ViolationReport>();
    for (const auto& a : j.at("actions")) t.actions.push_back(action_from_json(a));
    t.rationale = j.at("rationale").get<std::string>();
    t.explanation = j.at("explanation").get<std::string>();
    t.metrics = j.at("metrics").get<RunMetrics>();
    t.final_violation_fingerprint = j.at("final_violation_fingerprint").get<std::string>();
    t.final_network_fingerprint = j.at("final_network_fingerprint").get<std::string>();
    t.prompt = {j.at("prompt").at("system").get<std::string>(), j.at("prompt").at("user").get<std::string>()};
    t.assistant = j.at("assistant").get<std::string>();
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed training record: ") + e.what());
  }
}

bool replay_matches(const TrainingRecord& r, const SolveOptions& opts) {
  Network net = network_from_case(r.initial_case);
  if (!apply_plan(net, r.actions).ok()) return false;
  const PowerFlowSolution sol = solve(net, opts);
  if (!sol.converged) return false;
  const ViolationReport rep = analyze(net, sol);
  return fingerprint_hex(rep.fingerprint) == r.final_violation_fingerprint &&
         fingerprint_hex(network_fingerprint(net)) == r.final_network_fingerprint;
}

ExportSummary export_training_data(const std::vector<RunRecord>& runs, ExportFormat format, const std::string& path,
                                   const WorkflowOptions& opts) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::WriteError, "cannot open '" + path + "' for writing");
  ExportSummary summary;
  for (const auto& run : runs) {
    auto rec = make_training_record(run, opts);
    if (!rec) {
      ++summary.skipped;
      continue;
    }
    json line;
    if (format == ExportFormat::Jsonl) {
      line = to_json(*rec);
    } else {
      line = {{"messages",
               json::array({{{"role", "system"}, {"content", rec->prompt.system}},
                            {{"role", "user"}, {"content", rec->prompt.user}},
                            {{"role", "assistant"}, {"content", rec->assistant}}})},
              {"metadata",
               {{"scenario", rec->scenario},
                {"initial_case", json::parse(serialize_case(rec->initial_case))},
                {"final_violation_fingerprint", rec->final_violation_fingerprint},
                {"final_network_fingerprint", rec->final_network_fingerprint}}}};
    }
    out << line.dump() << '\n';
    ++summary.written;
  }
  out.flush();
  if (!out) throw Error(ErrorCode::WriteError, "write to '" + path + "' failed");
  return summary;
}

}  // namespace gridagent
