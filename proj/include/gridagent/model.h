#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gridagent {

enum class BusKind { Slack, PV, PQ };

std::string_view to_string(BusKind kind);
std::optional<BusKind> parse_bus_kind(std::string_view text);

struct Bus {
  std::string id;
  std::string name;
  double nominal_kv = 0.0;
  BusKind kind = BusKind::PQ;
  double v_min_pu = 0.95;
  double v_max_pu = 1.05;
  bool in_service = true;

  bool operator==(const Bus&) const = default;
};

// Series impedance in physical ohms on the from-bus voltage base.
struct Branch {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
  double b_total_shunt_siemens = 0.0;
  double s_max_mva = 0.0;
  double i_max_ka = 0.0;
  bool in_service = true;
  bool switchable = false;

  bool operator==(const Branch&) const = default;
};

struct Switch {
  std::string id;
  std::string branch_id;
  bool closed = true;

  bool operator==(const Switch&) const = default;
};

struct Load {
  std::string id;
  std::string bus_id;
  double p_mw = 0.0;
  double q_mvar = 0.0;
  bool curtailable = false;
  double gamma = 0.0;
  double gamma_max = 0.5;

  /// Demand after curtailment, p_mw * (1 - gamma). Reactive demand is curtailed
  /// at constant power factor.
  double effective_p_mw() const { return p_mw * (1.0 - gamma); }
  double effective_q_mvar() const { return q_mvar * (1.0 - gamma); }

  bool operator==(const Load&) const = default;
};

struct Generator {
  std::string id;
  std::string bus_id;
  double p_mw = 0.0;
  double v_set_pu = 1.0;
  double q_min_mvar = 0.0;
  double q_max_mvar = 0.0;

  bool operator==(const Generator&) const = default;
};

// A battery injects (p_mw, q_mvar) at its bus. Unplaced entries are candidate
// slots and may not dispatch.
struct Battery {
  std::string id;
  std::string bus_id;
  bool placed = false;
  double p_mw = 0.0;
  double q_mvar = 0.0;
  double s_max_mva = 0.0;
  double p_max_mw = 0.0;
  double q_max_mvar = 0.0;

  bool operator==(const Battery&) const = default;
};

/// Plain, unvalidated network payload. build_network() turns it into a Network.
struct NetworkData {
  double base_mva = 100.0;
  int battery_budget = 0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Switch> switches;
  std::vector<Load> loads;
  std::vector<Generator> generators;
  std::vector<Battery> batteries;

  bool operator==(const NetworkData&) const = default;
};

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
};

using IdIndex = std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>>;

/// Validated, cross-linked grid. A Network is a value: copies share nothing.
///
/// Element order is the order of the source payload and is preserved by every
/// mutation, so serialization of a restored network is byte-identical.
class Network {
 public:
  Network() = default;

  double base_mva() const { return data_.base_mva; }
  int battery_budget() const { return data_.battery_budget; }
  int placed_battery_count() const;

  const NetworkData& data() const { return data_; }
  const std::vector<Bus>& buses() const { return data_.buses; }
  const std::vector<Branch>& branches() const { return data_.branches; }
  const std::vector<Switch>& switches() const { return data_.switches; }
  const std::vector<Load>& loads() const { return data_.loads; }
  const std::vector<Generator>& generators() const { return data_.generators; }
  const std::vector<Battery>& batteries() const { return data_.batteries; }

  std::optional<std::size_t> bus_index(std::string_view id) const;
  std::optional<std::size_t> branch_index(std::string_view id) const;
  std::optional<std::size_t> switch_index(std::string_view id) const;
  std::optional<std::size_t> load_index(std::string_view id) const;
  std::optional<std::size_t> generator_index(std::string_view id) const;
  std::optional<std::size_t> battery_index(std::string_view id) const;

  // Throwing lookups (UnknownElement / UnknownBranch).
  const Bus& bus(std::string_view id) const;
  const Branch& branch(std::string_view id) const;
  const Switch& switch_(std::string_view id) const;
  const Load& load(std::string_view id) const;
  const Battery& battery(std::string_view id) const;

  /// Switch guarding a branch, if any.
  const Switch* switch_for_branch(std::string_view branch_id) const;
  const Bus& slack_bus() const;

  // Mutations used by the action layer. Callers check constraints first.
  void set_switch_closed(std::string_view switch_id, bool closed);
  void set_load_gamma(std::string_view load_id, double gamma);
  void set_battery(std::string_view battery_id, const Battery& battery);
  void insert_battery(std::size_t position, Battery battery);
  void erase_battery(std::string_view battery_id);

  bool operator==(const Network& other) const { return data_ == other.data_; }

 private:
  friend Network build_network(NetworkData data);
  void reindex();

  NetworkData data_;
  IdIndex bus_index_;
  IdIndex branch_index_;
  IdIndex switch_index_;
  IdIndex load_index_;
  IdIndex generator_index_;
  IdIndex battery_index_;
  IdIndex branch_switch_;
};

/// Validates every cross-reference and invariant. Throws gridagent::Error.
Network build_network(NetworkData data);

/// in_service and (no switch or switch closed).
bool effective_branch_state(const Network& net, std::string_view branch_id);

/// Order-sensitive 64-bit hash of the full network state.
std::uint64_t network_fingerprint(const Network& net);

/// Smallest "BAT<k>" id not already in use.
std::string next_battery_id(const std::vector<std::string>& existing_ids);
std::string next_battery_id(const Network& net);

namespace per_unit {

inline double impedance_base_ohm(double kv, double base_mva) { return kv * kv / base_mva; }
inline double current_base_ka(double kv, double base_mva) { return base_mva / (1.7320508075688772 * kv); }

inline double ohm_to_pu(double ohm, double kv, double base_mva) { return ohm / impedance_base_ohm(kv, base_mva); }
inline double pu_to_ohm(double pu, double kv, double base_mva) { return pu * impedance_base_ohm(kv, base_mva); }
inline double siemens_to_pu(double s, double kv, double base_mva) { return s * impedance_base_ohm(kv, base_mva); }
inline double pu_to_siemens(double pu, double kv, double base_mva) { return pu / impedance_base_ohm(kv, base_mva); }

}  // namespace per_unit

}  // namespace gridagent
