// gridagent command-line front end.
//
// Exit codes: 0 success / resolved, 2 exhausted or unresolved, 3 bad input,
// 4 transport failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "gridagent/case_io.h"
#include "gridagent/error.h"
#include "gridagent/harness.h"
#include "gridagent/planner.h"
#include "gridagent/powerflow.h"
#include "gridagent/representation.h"
#include "gridagent/violations.h"
#include "gridagent/workflow.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gridagent;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUnresolved = 2;
constexpr int kExitInput = 3;
constexpr int kExitTransport = 4;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnknownCase, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::WriteError, "cannot write '" + path + "'");
  out << text;
}

bool looks_like_scenario(const std::string& path) {
  if (!path.ends_with(".json") || !fs::exists(path)) return false;
  json j = json::parse(read_file(path), nullptr, false);
  return j.is_object() && j.contains("perturbations");
}

bool is_preset(const std::string& name) {
  for (const auto& p : scenario_presets()) {
    if (p.name == name) return true;
  }
  return false;
}

// Builtin name, .m / .gridcase.json file, scenario JSON file, or preset name.
Scenario input_scenario(const std::string& name) {
  if (is_preset(name)) return build_preset(scenario_preset(name));
  if (looks_like_scenario(name)) return json::parse(read_file(name)).get<Scenario>();
  Scenario s;
  s.name = fs::path(name).filename().string();
  s.base = name;
  return s;
}

json solution_json(const Network& net, const PowerFlowSolution& sol) {
  json buses = json::array();
  for (const auto& b : sol.buses) {
    buses.push_back({{"id", b.id},
                     {"energized", b.energized},
                     {"v_pu", b.v_pu},
                     {"theta_deg", b.theta_rad * 180.0 / 3.14159265358979323846},
                     {"p_injection_mw", b.p_injection_mw},
                     {"q_injection_mvar", b.q_injection_mvar}});
  }
  json branches = json::array();
  for (const auto& f : sol.branches) {
    branches.push_back({{"id", f.id},
                        {"active", f.active},
                        {"p_from_mw", f.p_from_mw},
                        {"q_from_mvar", f.q_from_mvar},
                        {"p_to_mw", f.p_to_mw},
                        {"q_to_mvar", f.q_to_mvar},
                        {"s_mva", f.s_mva},
                        {"i_ka", f.i_ka},
                        {"loading_percent", f.loading_percent}});
  }
  json islands = json::array();
  for (const auto& i : sol.islands) islands.push_back({{"buses", i.bus_ids}, {"energized", i.energized}});
  return {{"converged", sol.converged},
          {"iterations", sol.iterations},
          {"max_mismatch_pu", sol.max_mismatch_pu},
          {"q_limit_switches", sol.q_limit_switches},
          {"base_mva", net.base_mva()},
          {"buses", std::move(buses)},
          {"branches", std::move(branches)},
          {"islands", std::move(islands)}};
}

struct LlmFlags {
  std::string endpoint;
  std::string model;
  std::string api_key_env = "GRID_AGENT_LLM_API_KEY";
  double timeout = 60.0;
  int retries = 2;
  int thinking_budget = -1;
  double temperature = -1.0;
};

void add_llm_flags(CLI::App* cmd, LlmFlags& f) {
  cmd->add_option("--endpoint", f.endpoint, "Chat-completion URL (default: $GRID_AGENT_LLM_ENDPOINT)");
  cmd->add_option("--model", f.model, "Model name (default: $GRID_AGENT_LLM_MODEL)");
  cmd->add_option("--api-key-env", f.api_key_env, "Environment variable holding the API key");
  cmd->add_option("--timeout", f.timeout, "Per-request timeout in seconds");
  cmd->add_option("--retries", f.retries, "Transport retries per request");
  cmd->add_option("--thinking-budget", f.thinking_budget, "Forwarded as thinking_budget when >= 0");
  cmd->add_option("--temperature", f.temperature, "Forwarded when >= 0");
}

PlannerFactory planner_factory(const std::string& kind, const LlmFlags& f) {
  if (kind == "heuristic") return [] { return std::make_unique<HeuristicPlanner>(); };
  LlmClientConfig cfg = LlmClientConfig::from_env(f.endpoint, f.model);
  cfg.api_key_env = f.api_key_env;
  cfg.timeout_seconds = f.timeout;
  cfg.max_retries = f.retries;
  if (f.thinking_budget >= 0) cfg.thinking_budget = f.thinking_budget;
  if (f.temperature >= 0.0) cfg.temperature = f.temperature;
  cfg.validate();
  ChatTransport transport = make_http_transport(cfg);
  return [cfg, transport] { return std::make_unique<LlmPlanner>(cfg, transport); };
}

int exit_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::TransportError:
    case ErrorCode::UnparseableAfterRepair: return kExitTransport;
    case ErrorCode::TargetUnreachable:
    case ErrorCode::NoImprovingPlan: return kExitUnresolved;
    default: return kExitInput;
  }
}

bool transport_failure(const ResolutionResult& r) {
  for (const auto& a : r.attempts) {
    if (a.outcome == AttemptOutcome::PlannerError &&
        (a.detail.starts_with("TransportError") || a.detail.starts_with("UnparseableAfterRepair"))) {
      return true;
    }
  }
  return false;
}

std::optional<ViolationKind> kind_arg(const std::string& s) {
  if (s == "voltage") return ViolationKind::Undervoltage;
  return parse_violation_kind(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power-grid violation detection and autonomous resolution"};
  app.require_subcommand(1);

  // solve
  std::string solve_case;
  double tolerance = 1e-8;
  int max_iter = 50;
  std::string solve_out;
  auto* solve_cmd = app.add_subcommand("solve", "Run an AC power flow and print the result as JSON");
  solve_cmd->add_option("case", solve_case, "Builtin name, case file, scenario file or preset")->required();
  solve_cmd->add_option("--tolerance", tolerance, "Mismatch tolerance in pu");
  solve_cmd->add_option("--max-iter", max_iter, "Newton-Raphson iteration cap");
  solve_cmd->add_option("-o,--output", solve_out, "Output file (default stdout)");

  // analyze
  std::string analyze_case, analyze_out;
  auto* analyze_cmd = app.add_subcommand("analyze", "Print the violation report as JSON");
  analyze_cmd->add_option("case", analyze_case, "Builtin name, case file, scenario file or preset")->required();
  analyze_cmd->add_option("-o,--output", analyze_out, "Output file (default stdout)");

  // resolve
  std::string resolve_case, planner_kind = "heuristic", resolve_out, dump_context, save_run;
  WorkflowOptions wopts;
  LlmFlags llm;
  auto* resolve_cmd = app.add_subcommand("resolve", "Run the plan/execute/validate loop");
  resolve_cmd->add_option("case", resolve_case, "Builtin name, case file, scenario file or preset")->required();
  resolve_cmd->add_option("--planner", planner_kind, "heuristic | llm")->check(CLI::IsMember({"heuristic", "llm"}));
  resolve_cmd->add_option("--t-max", wopts.t_max, "Iteration limit")->check(CLI::NonNegativeNumber);
  resolve_cmd->add_option("--budget", wopts.token_budget, "Context token budget")->check(CLI::PositiveNumber);
  resolve_cmd->add_option("--hops", wopts.focus_hops, "Focus radius for the semantic context")->check(CLI::PositiveNumber);
  resolve_cmd->add_option("--dump-context", dump_context, "Write the initial planner context to this file");
  resolve_cmd->add_option("--save-run", save_run, "Write the run record (input for export-data)");
  resolve_cmd->add_option("-o,--output", resolve_out, "ResolutionResult JSON file (default stdout)");
  add_llm_flags(resolve_cmd, llm);

  // gen-scenario
  std::string gen_case, gen_out, gen_name;
  int target_count = 1;
  std::vector<std::string> kinds;
  std::uint64_t seed = 1;
  GeneratorOptions gopts;
  auto* gen_cmd = app.add_subcommand("gen-scenario", "Generate a seeded violation scenario");
  gen_cmd->add_option("case", gen_case, "Builtin name or case file")->required();
  gen_cmd->add_option("--target-count", target_count, "Minimum number of violations")->required();
  gen_cmd->add_option("--kinds", kinds, "Kinds that must be present: undervoltage overvoltage thermal disconnected");
  gen_cmd->add_option("--seed", seed, "Search seed");
  gen_cmd->add_option("--max-scale", gopts.max_load_scale, "Largest load scale factor tried");
  gen_cmd->add_option("--name", gen_name, "Scenario name");
  gen_cmd->add_option("-o,--output", gen_out, "Scenario JSON file (default stdout)");

  // benchmark
  std::string suite_file, bench_out, runs_dir;
  BenchmarkOptions bopts;
  bool timing = false, table = false;
  auto* bench_cmd = app.add_subcommand("benchmark", "Run a scenario suite and aggregate metrics");
  bench_cmd->add_option("--suite", suite_file, "Suite JSON file, or 'presets'")->required();
  bench_cmd->add_option("--planner", planner_kind, "heuristic | llm")->check(CLI::IsMember({"heuristic", "llm"}));
  bench_cmd->add_option("--jobs", bopts.jobs, "Parallel runs")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--repetitions", bopts.repetitions, "Runs per scenario")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--t-max", bopts.workflow.t_max, "Iteration limit")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--budget", bopts.workflow.token_budget, "Context token budget")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--runs-dir", runs_dir, "Write one run record per run here");
  bench_cmd->add_flag("--timing", timing, "Include wall-clock fields (makes the report non-deterministic)");
  bench_cmd->add_flag("--table", table, "Print an aligned text table to stdout");
  bench_cmd->add_option("-o,--output", bench_out, "Report JSON file (default stdout)");
  add_llm_flags(bench_cmd, llm);

  // export-data
  std::string export_runs, export_format = "jsonl", export_out;
  auto* export_cmd = app.add_subcommand("export-data", "Export successful runs as training data");
  export_cmd->add_option("--runs", export_runs, "Directory of run records")->required();
  export_cmd->add_option("--format", export_format, "jsonl | chat_jsonl")->check(CLI::IsMember({"jsonl", "chat_jsonl"}));
  export_cmd->add_option("-o,--output", export_out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*solve_cmd) {
      const Network net = scenario_network(input_scenario(solve_case));
      SolveOptions so;
      so.tolerance_pu = tolerance;
      so.max_iterations = max_iter;
      const PowerFlowSolution sol = solve(net, so);
      write_output(solve_out, solution_json(net, sol).dump(2) + "\n");
      return sol.converged ? kExitOk : kExitUnresolved;
    }

    if (*analyze_cmd) {
      const Network net = scenario_network(input_scenario(analyze_case));
      const PowerFlowSolution sol = solve(net);
      const ViolationReport rep = analyze(net, sol);
      write_output(analyze_out, json(rep).dump(2) + "\n");
      return kExitOk;
    }

    if (*resolve_cmd) {
      const Scenario scenario = input_scenario(resolve_case);
      auto planner = planner_factory(planner_kind, llm)();
      if (!dump_context.empty()) {
        const Network net = scenario_network(scenario);
        const PowerFlowSolution sol = solve(net, wopts.solve);
        const ViolationReport rep = analyze(net, sol);
        write_output(dump_context, render_context(net, sol, rep, wopts.token_budget, wopts.focus_hops).text);
      }
      const RunRecord rec = run_scenario(scenario, *planner, wopts);
      const std::string result = to_json(rec.result).dump(2) + "\n";
      if (resolve_out.empty()) {
        std::cout << result;
        std::cerr << rec.result.explanation;
      } else {
        write_output(resolve_out, result);
        std::cout << rec.result.explanation;
      }
      if (!save_run.empty()) write_output(save_run, run_record_to_json(rec).dump() + "\n");
      if (transport_failure(rec.result) && rec.result.accepted_actions.empty()) return kExitTransport;
      return rec.result.status == RunStatus::Resolved ? kExitOk : kExitUnresolved;
    }

    if (*gen_cmd) {
      ScenarioTarget target;
      target.count = target_count;
      for (const auto& k : kinds) {
        auto kind = kind_arg(k);
        if (!kind) throw Error(ErrorCode::InvalidArguments, "unknown violation kind '" + k + "'");
        target.kinds.insert(*kind);
      }
      if (target.kinds.size() == 1 && target.kinds.contains(ViolationKind::Disconnected)) {
        target.min_by_kind[ViolationKind::Disconnected] = target_count;
      }
      const CaseDocument doc = load_case(gen_case);
      const Scenario s = generate_scenario(gen_case, network_from_case(doc), target, seed, gopts, gen_name);
      write_output(gen_out, json(s).dump(2) + "\n");
      return kExitOk;
    }

    if (*bench_cmd) {
      std::vector<Scenario> suite;
      if (suite_file == "presets") {
        for (const auto& p : scenario_presets()) suite.push_back(build_preset(p));
      } else {
        const json j = json::parse(read_file(suite_file));
        const json& items = j.is_array() ? j : j.at("scenarios");
        for (const auto& item : items) {
          suite.push_back(item.is_string() ? input_scenario(item.get<std::string>()) : item.get<Scenario>());
        }
      }
      if (!runs_dir.empty()) {
        fs::create_directories(runs_dir);
        bopts.on_run = [&](const RunRecord& rec, int rep) {
          write_output((fs::path(runs_dir) / fmt::format("{}-r{}.json", rec.scenario.name, rep)).string(),
                       run_record_to_json(rec).dump() + "\n");
        };
      }
      const BenchmarkReport report = run_benchmark(suite, planner_factory(planner_kind, llm), bopts);
      write_output(bench_out, to_json(report, timing).dump(2) + "\n");
      if (table) std::cout << format_table(report, timing);
      return report.success_rate == 1.0 ? kExitOk : kExitUnresolved;
    }

    if (*export_cmd) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(export_runs)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      std::vector<RunRecord> runs;
      for (const auto& f : files) runs.push_back(run_record_from_json(json::parse(read_file(f.string()))));
      const auto fmt_kind = export_format == "jsonl" ? ExportFormat::Jsonl : ExportFormat::ChatJsonl;
      const ExportSummary s = export_training_data(runs, fmt_kind, export_out);
      std::cout << fmt::format("wrote {} record(s), skipped {} unsuccessful run(s)\n", s.written, s.skipped);
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_for(e);
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON input: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
