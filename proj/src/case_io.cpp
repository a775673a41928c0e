#include "gridagent/case_io.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "gridagent/error.h"

namespace gridagent {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

bool ScenarioOverlay::empty() const {
  return load_scale == 1.0 && load_scales.empty() && switch_states.empty() && derates.empty() &&
         open_branches.empty();
}

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::SchemaError, path + ": " + what);
}

// Strict object reader: every key must be consumed, types are checked.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) schema_error(path_, "expected an object");
  }

  const json* find(const std::string& key) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  const json& need(const std::string& key) {
    const json* v = find(key);
    if (v == nullptr) schema_error(path_, "missing required field '" + key + "'");
    return *v;
  }

  std::string str(const std::string& key) {
    const json& v = need(key);
    if (!v.is_string()) schema_error(at(key), "expected a string");
    return v.get<std::string>();
  }

  std::string str_or(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    if (v == nullptr) return fallback;
    if (!v->is_string()) schema_error(at(key), "expected a string");
    return v->get<std::string>();
  }

  double num(const std::string& key) { return as_number(need(key), key); }

  double num_or(const std::string& key, double fallback) {
    const json* v = find(key);
    return v == nullptr ? fallback : as_number(*v, key);
  }

  bool flag(const std::string& key) {
    const json& v = need(key);
    if (!v.is_boolean()) schema_error(at(key), "expected a boolean");
    return v.get<bool>();
  }

  bool flag_or(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) schema_error(at(key), "expected a boolean");
    return v->get<bool>();
  }

  const json& array(const std::string& key) {
    const json& v = need(key);
    if (!v.is_array()) schema_error(at(key), "expected an array");
    return v;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.contains(it.key())) schema_error(path_, "unexpected field '" + it.key() + "'");
    }
  }

  std::string at(const std::string& key) const { return path_ + "/" + key; }

 private:
  double as_number(const json& v, const std::string& key) const {
    if (!v.is_number()) schema_error(at(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) schema_error(at(key), "expected a finite number");
    return d;
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T, typename Fn>
std::vector<T> read_list(Fields& top, const std::string& key, Fn&& read_one) {
  std::vector<T> out;
  const json& arr = top.array(key);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    Fields f(arr[i], "/" + key + "/" + std::to_string(i));
    out.push_back(read_one(f));
    f.finish();
  }
  return out;
}

Bus read_bus(Fields& f) {
  Bus b;
  b.id = f.str("id");
  b.name = f.str_or("name", b.id);
  b.nominal_kv = f.num("nominal_kv");
  const std::string kind = f.str("kind");
  auto k = parse_bus_kind(kind);
  if (!k) schema_error(f.at("kind"), "expected one of slack, pv, pq");
  b.kind = *k;
  b.v_min_pu = f.num_or("v_min_pu", 0.95);
  b.v_max_pu = f.num_or("v_max_pu", 1.05);
  b.in_service = f.flag_or("in_service", true);
  return b;
}

Branch read_branch(Fields& f) {
  Branch br;
  br.id = f.str("id");
  br.from_bus = f.str("from_bus");
  br.to_bus = f.str("to_bus");
  br.r_ohm = f.num("r_ohm");
  br.x_ohm = f.num("x_ohm");
  br.b_total_shunt_siemens = f.num_or("b_total_shunt_siemens", 0.0);
  br.s_max_mva = f.num("s_max_mva");
  br.i_max_ka = f.num("i_max_ka");
  br.in_service = f.flag_or("in_service", true);
  br.switchable = f.flag_or("switchable", false);
  return br;
}

Switch read_switch(Fields& f) {
  Switch s;
  s.id = f.str("id");
  s.branch_id = f.str("branch_id");
  s.closed = f.flag("closed");
  return s;
}

Load read_load(Fields& f) {
  Load l;
  l.id = f.str("id");
  l.bus_id = f.str("bus_id");
  l.p_mw = f.num("p_mw");
  l.q_mvar = f.num_or("q_mvar", 0.0);
  l.curtailable = f.flag_or("curtailable", false);
  l.gamma = f.num_or("gamma", 0.0);
  l.gamma_max = f.num_or("gamma_max", 0.5);
  return l;
}

Generator read_generator(Fields& f) {
  Generator g;
  g.id = f.str("id");
  g.bus_id = f.str("bus_id");
  g.p_mw = f.num("p_mw");
  g.v_set_pu = f.num("v_set_pu");
  g.q_min_mvar = f.num("q_min_mvar");
  g.q_max_mvar = f.num("q_max_mvar");
  return g;
}

Battery read_battery(Fields& f) {
  Battery b;
  b.id = f.str("id");
  b.bus_id = f.str("bus_id");
  b.placed = f.flag("placed");
  b.p_mw = f.num_or("p_mw", 0.0);
  b.q_mvar = f.num_or("q_mvar", 0.0);
  b.s_max_mva = f.num("s_max_mva");
  b.p_max_mw = f.num_or("p_max_mw", b.s_max_mva);
  b.q_max_mvar = f.num_or("q_max_mvar", b.s_max_mva);
  return b;
}

ScenarioOverlay read_overlay(const json& j) {
  ScenarioOverlay o;
  Fields f(j, "/scenario");
  o.load_scale = f.num_or("load_scale", 1.0);
  auto read_map = [&](const std::string& key, auto& out, auto convert) {
    const json* m = f.find(key);
    if (m == nullptr) return;
    if (!m->is_object()) schema_error(f.at(key), "expected an object");
    for (auto it = m->begin(); it != m->end(); ++it) out[it.key()] = convert(*it, f.at(key) + "/" + it.key());
  };
  auto to_num = [](const json& v, const std::string& path) {
    if (!v.is_number() || !std::isfinite(v.get<double>())) schema_error(path, "expected a finite number");
    return v.get<double>();
  };
  auto to_bool = [](const json& v, const std::string& path) {
    if (!v.is_boolean()) schema_error(path, "expected a boolean");
    return v.get<bool>();
  };
  read_map("load_scales", o.load_scales, to_num);
  read_map("switch_states", o.switch_states, to_bool);
  read_map("derates", o.derates, to_num);
  if (const json* ob = f.find("open_branches")) {
    if (!ob->is_array()) schema_error(f.at("open_branches"), "expected an array");
    for (const auto& v : *ob) {
      if (!v.is_string()) schema_error(f.at("open_branches"), "expected strings");
      o.open_branches.push_back(v.get<std::string>());
    }
  }
  f.finish();
  return o;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

void validate_overlay(const NetworkData& d, const ScenarioOverlay& o) {
  auto has = [](const auto& items, const std::string& id) {
    return std::any_of(items.begin(), items.end(), [&](const auto& x) { return x.id == id; });
  };
  if (!(o.load_scale >= 0.0)) throw Error(ErrorCode::SemanticError, "/scenario/load_scale must be >= 0");
  for (const auto& [id, f] : o.load_scales) {
    if (!has(d.loads, id)) throw Error(ErrorCode::SemanticError, "/scenario/load_scales: unknown load '" + id + "'");
    if (f < 0.0) throw Error(ErrorCode::SemanticError, "/scenario/load_scales/" + id + " must be >= 0");
  }
  for (const auto& [id, closed] : o.switch_states) {
    if (!has(d.switches, id)) throw Error(ErrorCode::SemanticError, "/scenario/switch_states: unknown switch '" + id + "'");
  }
  for (const auto& [id, f] : o.derates) {
    if (!has(d.branches, id)) throw Error(ErrorCode::SemanticError, "/scenario/derates: unknown branch '" + id + "'");
    if (!(f > 0.0)) throw Error(ErrorCode::SemanticError, "/scenario/derates/" + id + " must be > 0");
  }
  for (const auto& id : o.open_branches) {
    if (!has(d.branches, id)) {
      throw Error(ErrorCode::SemanticError, "/scenario/open_branches: unknown branch '" + id + "'");
    }
  }
}

}  // namespace

CaseDocument parse_case_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorCode::SyntaxError,
                "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
  }

  CaseDocument doc;
  try {
    Fields top(root, "");
    doc.schema_version = top.str("schema_version");
    if (doc.schema_version != kCaseSchemaVersion) {
      schema_error("/schema_version", "unrecognized version '" + doc.schema_version + "'");
    }
    NetworkData& d = doc.network;
    d.base_mva = top.num("base_mva");
    const json& budget = top.need("battery_budget");
    if (!budget.is_number_integer()) schema_error("/battery_budget", "expected an integer");
    if (budget.get<long long>() < 0 || budget.get<long long>() > 1'000'000) {
      throw Error(ErrorCode::SemanticError, "/battery_budget must lie in [0, 1000000]");
    }
    d.battery_budget = static_cast<int>(budget.get<long long>());
    d.buses = read_list<Bus>(top, "buses", read_bus);
    d.branches = read_list<Branch>(top, "branches", read_branch);
    d.switches = read_list<Switch>(top, "switches", read_switch);
    d.loads = read_list<Load>(top, "loads", read_load);
    d.generators = read_list<Generator>(top, "generators", read_generator);
    d.batteries = read_list<Battery>(top, "batteries", read_battery);
    if (const json* sc = top.find("scenario")) doc.scenario = read_overlay(*sc);
    top.finish();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }

  try {
    build_network(doc.network);
    validate_overlay(doc.network, doc.scenario);
    build_network(apply_overlay(doc.network, doc.scenario));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SemanticError) throw;
    throw Error(ErrorCode::SemanticError, e.what());
  }
  return doc;
}

std::string serialize_case(const CaseDocument& doc) {
  const NetworkData& d = doc.network;
  ordered_json root;
  root["schema_version"] = doc.schema_version;
  root["base_mva"] = d.base_mva;
  root["battery_budget"] = d.battery_budget;

  ordered_json buses = ordered_json::array();
  for (const auto& b : d.buses) {
    ordered_json j;
    j["id"] = b.id;
    j["name"] = b.name;
    j["nominal_kv"] = b.nominal_kv;
    j["kind"] = std::string(to_string(b.kind));
    j["v_min_pu"] = b.v_min_pu;
    j["v_max_pu"] = b.v_max_pu;
    j["in_service"] = b.in_service;
    buses.push_back(std::move(j));
  }
  root["buses"] = std::move(buses);

  ordered_json branches = ordered_json::array();
  for (const auto& br : d.branches) {
    ordered_json j;
    j["id"] = br.id;
    j["from_bus"] = br.from_bus;
    j["to_bus"] = br.to_bus;
    j["r_ohm"] = br.r_ohm;
    j["x_ohm"] = br.x_ohm;
    j["b_total_shunt_siemens"] = br.b_total_shunt_siemens;
    j["s_max_mva"] = br.s_max_mva;
    j["i_max_ka"] = br.i_max_ka;
    j["in_service"] = br.in_service;
    j["switchable"] = br.switchable;
    branches.push_back(std::move(j));
  }
  root["branches"] = std::move(branches);

  ordered_json switches = ordered_json::array();
  for (const auto& s : d.switches) {
    ordered_json j;
    j["id"] = s.id;
    j["branch_id"] = s.branch_id;
    j["closed"] = s.closed;
    switches.push_back(std::move(j));
  }
  root["switches"] = std::move(switches);

  ordered_json loads = ordered_json::array();
  for (const auto& l : d.loads) {
    ordered_json j;
    j["id"] = l.id;
    j["bus_id"] = l.bus_id;
    j["p_mw"] = l.p_mw;
    j["q_mvar"] = l.q_mvar;
    j["curtailable"] = l.curtailable;
    j["gamma"] = l.gamma;
    j["gamma_max"] = l.gamma_max;
    loads.push_back(std::move(j));
  }
  root["loads"] = std::move(loads);

  ordered_json gens = ordered_json::array();
  for (const auto& g : d.generators) {
    ordered_json j;
    j["id"] = g.id;
    j["bus_id"] = g.bus_id;
    j["p_mw"] = g.p_mw;
    j["v_set_pu"] = g.v_set_pu;
    j["q_min_mvar"] = g.q_min_mvar;
    j["q_max_mvar"] = g.q_max_mvar;
    gens.push_back(std::move(j));
  }
  root["generators"] = std::move(gens);

  ordered_json bats = ordered_json::array();
  for (const auto& b : d.batteries) {
    ordered_json j;
    j["id"] = b.id;
    j["bus_id"] = b.bus_id;
    j["placed"] = b.placed;
    j["p_mw"] = b.p_mw;
    j["q_mvar"] = b.q_mvar;
    j["s_max_mva"] = b.s_max_mva;
    j["p_max_mw"] = b.p_max_mw;
    j["q_max_mvar"] = b.q_max_mvar;
    bats.push_back(std::move(j));
  }
  root["batteries"] = std::move(bats);

  if (!doc.scenario.empty()) {
    const ScenarioOverlay& o = doc.scenario;
    ordered_json sc;
    if (o.load_scale != 1.0) sc["load_scale"] = o.load_scale;
    if (!o.load_scales.empty()) {
      ordered_json m = ordered_json::object();
      for (const auto& [k, v] : o.load_scales) m[k] = v;
      sc["load_scales"] = std::move(m);
    }
    if (!o.switch_states.empty()) {
      ordered_json m = ordered_json::object();
      for (const auto& [k, v] : o.switch_states) m[k] = v;
      sc["switch_states"] = std::move(m);
    }
    if (!o.derates.empty()) {
      ordered_json m = ordered_json::object();
      for (const auto& [k, v] : o.derates) m[k] = v;
      sc["derates"] = std::move(m);
    }
    if (!o.open_branches.empty()) sc["open_branches"] = o.open_branches;
    root["scenario"] = std::move(sc);
  }
  return root.dump(2) + "\n";
}

NetworkData apply_overlay(NetworkData d, const ScenarioOverlay& o) {
  for (auto& l : d.loads) {
    double f = o.load_scale;
    if (auto it = o.load_scales.find(l.id); it != o.load_scales.end()) f *= it->second;
    l.p_mw *= f;
    l.q_mvar *= f;
  }
  for (auto& s : d.switches) {
    if (auto it = o.switch_states.find(s.id); it != o.switch_states.end()) s.closed = it->second;
  }
  for (auto& br : d.branches) {
    if (auto it = o.derates.find(br.id); it != o.derates.end()) {
      br.s_max_mva *= it->second;
      br.i_max_ka *= it->second;
    }
    if (std::find(o.open_branches.begin(), o.open_branches.end(), br.id) != o.open_branches.end()) {
      br.in_service = false;
    }
  }
  return d;
}

Network network_from_case(const CaseDocument& doc) {
  return build_network(apply_overlay(doc.network, doc.scenario));
}

CaseDocument case_from_network(const Network& net) {
  CaseDocument doc;
  doc.network = net.data();
  return doc;
}

std::string serialize_network(const Network& net) { return serialize_case(case_from_network(net)); }

int controllable_element_count(const Network& net) {
  const auto curtailable =
      std::count_if(net.loads().begin(), net.loads().end(), [](const Load& l) { return l.curtailable; });
  return static_cast<int>(net.switches().size() + static_cast<std::size_t>(curtailable));
}

CaseDocument load_case(const std::string& name_or_path) {
  const auto& names = builtin_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return builtin_case(name_or_path);
  std::ifstream in(name_or_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnknownCase, "no builtin case or readable file named '" + name_or_path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (name_or_path.size() >= 2 && name_or_path.ends_with(".m")) return parse_matpower_subset(text);
  return parse_case_json(text);
}

}  // namespace gridagent
