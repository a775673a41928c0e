// Built-in benchmark networks.
//
// ieee30:   MATPOWER case30 (Alsac & Stott variant, which carries line ratings
//           and 20 load points). Bus kV labels follow the 132/33 kV split of
//           the IEEE 30-bus system; the per-unit data is unchanged. Shunts at
//           buses 5 and 24 are dropped.
// cigre_mv: CIGRE MV European benchmark, 14 buses at 20 kV. The 110 kV
//           upstream bus and both transformers are replaced by a slack at
//           bus 1, so feeder 2 (buses 12-14) is fed through S1, which is
//           closed here. The original description calls this a 15-bus system
//           counting the 110 kV bus; it is 14 buses without it.
// ieee69:   69-bus radial distribution feeder at 12.66 kV.
//
// Ratings are not part of the ieee69 data and are too tight for the other two
// once their sources are simplified; the values below were set so the base
// cases solve without violations (see rating tables).

#include <cmath>
#include <iterator>
#include <string>

#include "gridagent/case_io.h"
#include "gridagent/error.h"

namespace gridagent {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

void set_rating(Branch& br, double s_max_mva, double kv) {
  br.s_max_mva = s_max_mva;
  br.i_max_ka = s_max_mva / (kSqrt3 * kv);
}

// ---------------------------------------------------------------- ieee30 ---

constexpr std::string_view kCase30 = R"(function mpc = case30
mpc.version = '2';
mpc.baseMVA = 100;

%% bus data
%	bus_i	type	Pd	Qd	Gs	Bs	area	Vm	Va	baseKV	zone	Vmax	Vmin
mpc.bus = [
	1	3	0	0	0	0	1	1	0	132	1	1.05	0.95;
	2	2	21.7	12.7	0	0	1	1	0	132	1	1.1	0.95;
	3	1	2.4	1.2	0	0	1	1	0	132	1	1.05	0.95;
	4	1	7.6	1.6	0	0	1	1	0	132	1	1.05	0.95;
	5	1	0	0	0	0.19	1	1	0	132	1	1.05	0.95;
	6	1	0	0	0	0	1	1	0	132	1	1.05	0.95;
	7	1	22.8	10.9	0	0	1	1	0	132	1	1.05	0.95;
	8	1	30	30	0	0	1	1	0	132	1	1.05	0.95;
	9	1	0	0	0	0	1	1	0	33	1	1.05	0.95;
	10	1	5.8	2	0	0	3	1	0	33	1	1.05	0.95;
	11	1	0	0	0	0	1	1	0	33	1	1.05	0.95;
	12	1	11.2	7.5	0	0	2	1	0	33	1	1.05	0.95;
	13	2	0	0	0	0	2	1	0	33	1	1.1	0.95;
	14	1	6.2	1.6	0	0	2	1	0	33	1	1.05	0.95;
	15	1	8.2	2.5	0	0	2	1	0	33	1	1.05	0.95;
	16	1	3.5	1.8	0	0	2	1	0	33	1	1.05	0.95;
	17	1	9	5.8	0	0	2	1	0	33	1	1.05	0.95;
	18	1	3.2	0.9	0	0	2	1	0	33	1	1.05	0.95;
	19	1	9.5	3.4	0	0	2	1	0	33	1	1.05	0.95;
	20	1	2.2	0.7	0	0	2	1	0	33	1	1.05	0.95;
	21	1	17.5	11.2	0	0	3	1	0	33	1	1.05	0.95;
	22	2	0	0	0	0	3	1	0	33	1	1.1	0.95;
	23	2	3.2	1.6	0	0	2	1	0	33	1	1.1	0.95;
	24	1	8.7	6.7	0	0.04	3	1	0	33	1	1.05	0.95;
	25	1	0	0	0	0	3	1	0	33	1	1.05	0.95;
	26	1	3.5	2.3	0	0	3	1	0	33	1	1.05	0.95;
	27	2	0	0	0	0	3	1	0	33	1	1.1	0.95;
	28	1	0	0	0	0	1	1	0	132	1	1.05	0.95;
	29	1	2.4	0.9	0	0	3	1	0	33	1	1.05	0.95;
	30	1	10.6	1.9	0	0	3	1	0	33	1	1.05	0.95;
];

%% generator data
%	bus	Pg	Qg	Qmax	Qmin	Vg	mBase	status	Pmax	Pmin
mpc.gen = [
	1	23.54	0	150	-20	1	100	1	80	0;
	2	60.97	0	60	-20	1	100	1	80	0;
	22	21.59	0	62.5	-15	1	100	1	50	0;
	27	26.91	0	48.7	-15	1	100	1	55	0;
	23	19.2	0	40	-10	1	100	1	30	0;
	13	37	0	44.7	-15	1	100	1	40	0;
];

%% branch data
%	fbus	tbus	r	x	b	rateA	rateB	rateC	ratio	angle	status
mpc.branch = [
	1	2	0.02	0.06	0.03	130	130	130	0	0	1;
	1	3	0.05	0.19	0.02	130	130	130	0	0	1;
	2	4	0.06	0.17	0.02	65	65	65	0	0	1;
	3	4	0.01	0.04	0	130	130	130	0	0	1;
	2	5	0.05	0.2	0.02	130	130	130	0	0	1;
	2	6	0.06	0.18	0.02	65	65	65	0	0	1;
	4	6	0.01	0.04	0	90	90	90	0	0	1;
	5	7	0.05	0.12	0.01	70	70	70	0	0	1;
	6	7	0.03	0.08	0.01	130	130	130	0	0	1;
	6	8	0.01	0.04	0	32	32	32	0	0	1;
	6	9	0	0.21	0	65	65	65	0	0	1;
	6	10	0	0.56	0	32	32	32	0	0	1;
	9	11	0	0.21	0	65	65	65	0	0	1;
	9	10	0	0.11	0	65	65	65	0	0	1;
	4	12	0	0.26	0	65	65	65	0	0	1;
	12	13	0	0.14	0	65	65	65	0	0	1;
	12	14	0.12	0.26	0	32	32	32	0	0	1;
	12	15	0.07	0.13	0	32	32	32	0	0	1;
	12	16	0.09	0.2	0	32	32	32	0	0	1;
	14	15	0.22	0.2	0	16	16	16	0	0	1;
	16	17	0.08	0.19	0	16	16	16	0	0	1;
	15	18	0.11	0.22	0	16	16	16	0	0	1;
	18	19	0.06	0.13	0	16	16	16	0	0	1;
	19	20	0.03	0.07	0	32	32	32	0	0	1;
	10	20	0.09	0.21	0	32	32	32	0	0	1;
	10	17	0.03	0.08	0	32	32	32	0	0	1;
	10	21	0.03	0.07	0	32	32	32	0	0	1;
	10	22	0.07	0.15	0	32	32	32	0	0	1;
	21	22	0.01	0.02	0	32	32	32	0	0	1;
	15	23	0.1	0.2	0	16	16	16	0	0	1;
	22	24	0.12	0.18	0	16	16	16	0	0	1;
	23	24	0.13	0.27	0	16	16	16	0	0	1;
	24	25	0.19	0.33	0	16	16	16	0	0	1;
	25	26	0.25	0.38	0	16	16	16	0	0	1;
	25	27	0.11	0.21	0	16	16	16	0	0	1;
	28	27	0	0.4	0	65	65	65	0	0	1;
	27	29	0.22	0.42	0	16	16	16	0	0	1;
	27	30	0.32	0.6	0	16	16	16	0	0	1;
	29	30	0.24	0.45	0	16	16	16	0	0	1;
	8	28	0.06	0.2	0.02	32	32	32	0	0	1;
	6	28	0.02	0.06	0.01	32	32	32	0	0	1;
];
)";

CaseDocument ieee30() {
  CaseDocument doc = parse_matpower_subset(kCase30);
  NetworkData& d = doc.network;
  for (auto& b : d.buses) b.name = "Bus " + b.id;

  d.switches.push_back({"SW1", "BR30", true});  // 15-23, closes the 15-23-24 loop
  for (auto& br : d.branches) {
    if (br.id == "BR30") br.switchable = true;
  }
  for (auto& l : d.loads) {
    if (l.id == "L7" || l.id == "L21") l.curtailable = true;
  }
  // 6-8 feeds the 30 MW bus-8 load without local generation and 21-22 sits at
  // 95% in the base case; both are uprated to about 1.45x base flow.
  for (auto& br : d.branches) {
    if (br.id == "BR10") set_rating(br, 50.0, 132.0);
    if (br.id == "BR29") set_rating(br, 45.0, 33.0);
  }
  d.battery_budget = 2;
  return doc;
}

// -------------------------------------------------------------- cigre_mv ---

struct CigreLine {
  int from;
  int to;
  double length_km;
  bool cable;
};

constexpr CigreLine kCigreLines[] = {
    {1, 2, 2.82, true},   {2, 3, 4.42, true},   {3, 4, 0.61, true},   {4, 5, 0.56, true},
    {5, 6, 1.54, true},   {7, 8, 1.67, true},   {8, 9, 0.32, true},   {9, 10, 0.77, true},
    {10, 11, 0.33, true}, {3, 8, 1.3, true},    {12, 13, 4.89, false}, {13, 14, 2.99, false},
    {6, 7, 0.24, true},   {11, 4, 0.49, true},  {14, 8, 2.0, false},
};

// (bus, residential MW at pf 0.97, commercial/industrial MW at pf 0.85)
struct CigreLoad {
  int bus;
  double residential_mw;
  double commercial_mw;
};

constexpr CigreLoad kCigreLoads[] = {
    {3, 0.285, 0.265}, {4, 0.445, 0.0},   {5, 0.750, 0.0},   {6, 0.565, 0.0},
    {7, 0.0, 0.090},   {8, 0.605, 0.0},   {9, 0.0, 0.675},   {10, 0.490, 0.080},
    {11, 0.340, 0.0},  {13, 0.0, 0.040},  {14, 0.215, 0.390},
};

// Bus 1 stands in for the 110/20 kV substation secondary, so its set point
// includes the transformer tap boost. The first two cable sections carry both
// feeders and are uprated.
constexpr double kCigreSlackVoltage = 1.05;
constexpr double kCigreTrunkImaxKa = 0.25;

CaseDocument cigre_mv() {
  CaseDocument doc;
  NetworkData& d = doc.network;
  d.base_mva = 10.0;
  d.battery_budget = 3;
  constexpr double kv = 20.0;
  for (int i = 1; i <= 14; ++i) {
    Bus b;
    b.id = std::to_string(i);
    b.name = "Bus " + b.id;
    b.nominal_kv = kv;
    b.kind = i == 1 ? BusKind::Slack : BusKind::PQ;
    d.buses.push_back(std::move(b));
  }
  d.generators.push_back({"G1", "1", 0.0, kCigreSlackVoltage, -100.0, 100.0});

  const double omega = 2.0 * M_PI * 50.0;
  for (const auto& l : kCigreLines) {
    Branch br;
    br.id = std::to_string(l.from) + "-" + std::to_string(l.to);
    br.from_bus = std::to_string(l.from);
    br.to_bus = std::to_string(l.to);
    const double r = l.cable ? 0.501 : 0.510;
    const double x = l.cable ? 0.716 : 0.366;
    const double c_nf = l.cable ? 151.1749 : 10.09679;
    br.r_ohm = r * l.length_km;
    br.x_ohm = x * l.length_km;
    br.b_total_shunt_siemens = omega * c_nf * 1e-9 * l.length_km;
    const bool trunk = (l.from == 1 && l.to == 2) || (l.from == 2 && l.to == 3);
    br.i_max_ka = trunk ? kCigreTrunkImaxKa : l.cable ? 0.145 : 0.195;
    br.s_max_mva = kSqrt3 * kv * br.i_max_ka;
    d.branches.push_back(std::move(br));
  }
  auto add_switch = [&](std::string id, std::string branch, bool closed) {
    for (auto& br : d.branches) {
      if (br.id == branch) br.switchable = true;
    }
    d.switches.push_back({std::move(id), std::move(branch), closed});
  };
  add_switch("S1", "14-8", true);
  add_switch("S2", "6-7", false);
  add_switch("S3", "11-4", false);

  const double tan_r = std::tan(std::acos(0.97));
  const double tan_ci = std::tan(std::acos(0.85));
  for (const auto& l : kCigreLoads) {
    Load load;
    load.bus_id = std::to_string(l.bus);
    load.id = "L" + load.bus_id;
    load.p_mw = l.residential_mw + l.commercial_mw;
    load.q_mvar = l.residential_mw * tan_r + l.commercial_mw * tan_ci;
    load.curtailable = l.bus == 5 || l.bus == 6 || l.bus == 8 || l.bus == 9 || l.bus == 10 || l.bus == 14;
    d.loads.push_back(std::move(load));
  }
  return doc;
}

// ---------------------------------------------------------------- ieee69 ---

struct FeederBranch {
  int from;
  int to;
  double r_ohm;
  double x_ohm;
};

constexpr FeederBranch kIeee69Branches[] = {
    {1, 2, 0.0005, 0.0012},   {2, 3, 0.0005, 0.0012},   {3, 4, 0.0015, 0.0036},   {4, 5, 0.0251, 0.0294},
    {5, 6, 0.366, 0.1864},    {6, 7, 0.381, 0.1941},    {7, 8, 0.0922, 0.047},    {8, 9, 0.0493, 0.0251},
    {9, 10, 0.819, 0.2707},   {10, 11, 0.1872, 0.0619}, {11, 12, 0.7114, 0.2351}, {12, 13, 1.03, 0.34},
    {13, 14, 1.044, 0.34},    {14, 15, 1.058, 0.3496},  {15, 16, 0.1966, 0.065},  {16, 17, 0.3744, 0.1238},
    {17, 18, 0.0047, 0.0016}, {18, 19, 0.3276, 0.1083}, {19, 20, 0.2106, 0.069},  {20, 21, 0.3416, 0.1129},
    {21, 22, 0.014, 0.0046},  {22, 23, 0.1591, 0.0526}, {23, 24, 0.3463, 0.1145}, {24, 25, 0.7488, 0.2475},
    {25, 26, 0.3089, 0.1021}, {26, 27, 0.1732, 0.0572}, {3, 28, 0.0044, 0.0108},  {28, 29, 0.064, 0.1565},
    {29, 30, 0.3978, 0.1315}, {30, 31, 0.0702, 0.0232}, {31, 32, 0.351, 0.116},   {32, 33, 0.839, 0.2816},
    {33, 34, 1.708, 0.5646},  {34, 35, 1.474, 0.4873},  {3, 36, 0.0044, 0.0108},  {36, 37, 0.064, 0.1565},
    {37, 38, 0.1053, 0.123},  {38, 39, 0.0304, 0.0355}, {39, 40, 0.0018, 0.0021}, {40, 41, 0.7283, 0.8509},
    {41, 42, 0.31, 0.3623},   {42, 43, 0.041, 0.0478},  {43, 44, 0.0092, 0.0116}, {44, 45, 0.1089, 0.1373},
    {45, 46, 0.0009, 0.0012}, {4, 47, 0.0034, 0.0084},  {47, 48, 0.0851, 0.2083}, {48, 49, 0.2898, 0.7091},
    {49, 50, 0.0822, 0.2011}, {8, 51, 0.0928, 0.0473},  {51, 52, 0.3319, 0.114},  {9, 53, 0.174, 0.0886},
    {53, 54, 0.203, 0.1034},  {54, 55, 0.2842, 0.1447}, {55, 56, 0.2813, 0.1433}, {56, 57, 1.59, 0.5337},
    {57, 58, 0.7837, 0.263},  {58, 59, 0.3042, 0.1006}, {59, 60, 0.3861, 0.1172}, {60, 61, 0.5075, 0.2585},
    {61, 62, 0.0974, 0.0496}, {62, 63, 0.145, 0.0738},  {63, 64, 0.7105, 0.3619}, {64, 65, 1.041, 0.5302},
    {11, 66, 0.2012, 0.0611}, {66, 67, 0.0047, 0.0014}, {12, 68, 0.7394, 0.2444}, {68, 69, 0.0047, 0.0016},
};

// Thermal ratings (MVA), aligned with kIeee69Branches: 1.5x the base-case
// apparent flow rounded up to 10 kVA, at least 50 kVA.
constexpr double kIeee69RatingsMva[] = {
    7.36, 7.36, 6.85, 5.28, 5.28, 5.22, 5.1,  4.87, 1.42, 1.36, 1.03, 0.65, 0.64, 0.62, 0.62, 0.54, 0.43,
    0.33, 0.33, 0.33, 0.12, 0.11, 0.11, 0.06, 0.06, 0.05, 0.17, 0.13, 0.08, 0.08, 0.08, 0.08, 0.05, 0.05,
    0.34, 0.3,  0.25, 0.25, 0.2,  0.16, 0.16, 0.16, 0.15, 0.15, 0.08, 1.58, 1.58, 1.43, 0.71, 0.09, 0.05,
    3.39, 3.37, 3.31, 3.25, 3.24, 3.16, 3.12, 2.92, 2.91, 0.59, 0.53, 0.53, 0.11, 0.07, 0.05, 0.11, 0.06,
};
static_assert(std::size(kIeee69RatingsMva) == std::size(kIeee69Branches));

// (bus, kW, kvar). The zero entries are load points without base demand.
struct FeederLoad {
  int bus;
  double p_kw;
  double q_kvar;
};

constexpr FeederLoad kIeee69Loads[] = {
    {6, 2.6, 2.2},      {7, 40.4, 30},      {8, 75, 54},        {9, 30, 22},        {10, 28, 19},
    {11, 145, 104},     {12, 145, 104},     {13, 8, 5.5},       {14, 8, 5.5},       {15, 0, 0},
    {16, 45.5, 30},     {17, 60, 35},       {18, 60, 35},       {19, 0, 0},         {20, 1, 0.6},
    {21, 114, 81},      {22, 5.3, 3.5},     {23, 0, 0},         {24, 28, 20},       {25, 0, 0},
    {26, 14, 10},       {27, 14, 10},       {28, 26, 18.6},     {29, 26, 18.6},     {30, 0, 0},
    {31, 0, 0},         {32, 0, 0},         {33, 14, 10},       {34, 19.5, 14},     {35, 6, 4},
    {36, 26, 18.6},     {37, 26, 18.6},     {38, 0, 0},         {39, 24, 17},       {40, 24, 17},
    {41, 1.2, 1},       {42, 0, 0},         {43, 6, 4.3},       {44, 0, 0},         {45, 39.2, 26.3},
    {46, 39.2, 26.3},   {47, 0, 0},         {48, 79, 56.4},     {49, 384.7, 274.5}, {50, 384.7, 274.5},
    {51, 40.5, 28.3},   {52, 3.6, 2.7},     {53, 4.3, 3.5},     {54, 26.4, 19},     {55, 24, 17.2},
    {59, 100, 72},      {61, 1244, 888},    {62, 32, 23},       {64, 227, 162},     {65, 59, 42},
    {66, 18, 13},       {67, 18, 13},       {68, 28, 20},       {69, 28, 20},
};

CaseDocument ieee69() {
  CaseDocument doc;
  NetworkData& d = doc.network;
  d.base_mva = 10.0;
  d.battery_budget = 3;
  constexpr double kv = 12.66;
  for (int i = 1; i <= 69; ++i) {
    Bus b;
    b.id = std::to_string(i);
    b.name = "Bus " + b.id;
    b.nominal_kv = kv;
    b.kind = i == 1 ? BusKind::Slack : BusKind::PQ;
    b.v_min_pu = 0.9;
    b.v_max_pu = 1.1;
    d.buses.push_back(std::move(b));
  }
  d.generators.push_back({"G1", "1", 0.0, 1.0, -10.0, 10.0});
  for (std::size_t k = 0; k < std::size(kIeee69Branches); ++k) {
    const auto& f = kIeee69Branches[k];
    Branch br;
    br.id = std::to_string(f.from) + "-" + std::to_string(f.to);
    br.from_bus = std::to_string(f.from);
    br.to_bus = std::to_string(f.to);
    br.r_ohm = f.r_ohm;
    br.x_ohm = f.x_ohm;
    set_rating(br, kIeee69RatingsMva[k], kv);
    d.branches.push_back(std::move(br));
  }
  auto add_switch = [&](std::string id, std::string branch) {
    for (auto& br : d.branches) {
      if (br.id == branch) br.switchable = true;
    }
    d.switches.push_back({std::move(id), std::move(branch), true});
  };
  add_switch("SW1", "3-28");
  add_switch("SW2", "9-53");
  add_switch("SW3", "53-54");

  for (const auto& f : kIeee69Loads) {
    Load l;
    l.bus_id = std::to_string(f.bus);
    l.id = "L" + l.bus_id;
    l.p_mw = f.p_kw / 1000.0;
    l.q_mvar = f.q_kvar / 1000.0;
    l.curtailable = f.bus == 21 || f.bus == 49 || f.bus == 50 || f.bus == 61 || f.bus == 64;
    d.loads.push_back(std::move(l));
  }
  return doc;
}

}  // namespace

const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"ieee30", "cigre_mv", "ieee69"};
  return names;
}

CaseDocument builtin_case(std::string_view name) {
  if (name == "ieee30") return ieee30();
  if (name == "cigre_mv") return cigre_mv();
  if (name == "ieee69") return ieee69();
  throw Error(ErrorCode::UnknownCase, "unknown builtin case '" + std::string(name) + "'");
}

Network builtin_network(std::string_view name) { return network_from_case(builtin_case(name)); }

}  // namespace gridagent
