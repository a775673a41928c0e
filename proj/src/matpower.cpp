// MATPOWER case subset: `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and `mpc.branch`
// numeric blocks. Other `mpc.*` fields are skipped; executable statements are
// rejected.

#include <cctype>
#include <cmath>
#include <map>
#include <optional>

#include "gridagent/case_io.h"
#include "gridagent/error.h"

namespace gridagent {

namespace {

constexpr std::size_t kBusMinCols = 13;
constexpr std::size_t kGenMinCols = 8;
constexpr std::size_t kBranchMinCols = 11;
constexpr double kPlaceholderRatingMva = 9999.0;

struct Matrix {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> row_lines;
};

class Scanner {
 public:
  explicit Scanner(std::string_view text) : text_(text) {}

  bool done() {
    skip_space(true);
    return pos_ >= text_.size();
  }

  std::size_t line() const { return line_; }

  void skip_space(bool newlines) {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '%') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (c == '.' && text_.substr(pos_, 3) == "...") {
        // line continuation
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
        if (pos_ < text_.size()) {
          ++pos_;
          ++line_;
        }
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else if (c == '\n' && newlines) {
        ++pos_;
        ++line_;
      } else {
        break;
      }
    }
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  char get() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  std::string identifier() {
    std::string out;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '.')) {
      out.push_back(text_[pos_++]);
    }
    return out;
  }

  void rest_of_line() {
    while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
  }

  std::optional<double> number() {
    const std::size_t start = pos_;
    if (peek() == '+' || peek() == '-') ++pos_;
    if (text_.substr(pos_, 3) == "Inf") {
      pos_ += 3;
      return text_[start] == '-' ? -HUGE_VAL : HUGE_VAL;
    }
    bool digits = false;
    while (std::isdigit(static_cast<unsigned char>(peek()))) {
      ++pos_;
      digits = true;
    }
    if (peek() == '.') {
      ++pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        ++pos_;
        digits = true;
      }
    }
    if (!digits) {
      pos_ = start;
      return std::nullopt;
    }
    if (peek() == 'e' || peek() == 'E') {
      std::size_t save = pos_;
      ++pos_;
      if (peek() == '+' || peek() == '-') ++pos_;
      if (!std::isdigit(static_cast<unsigned char>(peek()))) {
        pos_ = save;
      } else {
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      }
    }
    return std::strtod(std::string(text_.substr(start, pos_ - start)).c_str(), nullptr);
  }

  // Skips a balanced {...} or '...' value.
  void skip_balanced(char open, char close) {
    int depth = 0;
    while (pos_ < text_.size()) {
      const char c = get();
      if (c == '\'') {
        while (pos_ < text_.size() && get() != '\'') {
        }
      } else if (c == '%') {
        rest_of_line();
      } else if (c == open) {
        ++depth;
      } else if (c == close) {
        if (--depth == 0) return;
      }
    }
    throw Error(ErrorCode::SyntaxError, "unterminated block");
  }

  void quoted_string() {
    get();
    while (pos_ < text_.size() && peek() != '\'' && peek() != '\n') get();
    if (peek() != '\'') throw Error(ErrorCode::SyntaxError, "line " + std::to_string(line_) + ": unterminated string");
    get();
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

[[noreturn]] void unsupported(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::UnsupportedConstruct, "line " + std::to_string(line) + ": " + what);
}

Matrix read_matrix(Scanner& sc, const std::string& name) {
  Matrix m;
  sc.get();  // '['
  std::vector<double> row;
  std::size_t row_line = sc.line();
  auto end_row = [&]() {
    if (!row.empty()) {
      m.rows.push_back(std::move(row));
      m.row_lines.push_back(row_line);
      row.clear();
    }
  };
  for (;;) {
    sc.skip_space(false);
    const char c = sc.peek();
    if (c == '\0') throw Error(ErrorCode::SyntaxError, "mpc." + name + ": unterminated matrix");
    if (c == ']') {
      sc.get();
      end_row();
      break;
    }
    if (c == ';' || c == '\n') {
      sc.get();
      end_row();
      row_line = sc.line();
      continue;
    }
    if (c == ',') {
      sc.get();
      continue;
    }
    if (row.empty()) row_line = sc.line();
    auto v = sc.number();
    if (!v) unsupported(sc.line(), "mpc." + name + ": only numeric literals are supported inside matrices");
    const char next = sc.peek();
    if (next != ' ' && next != '\t' && next != '\r' && next != '\n' && next != ';' && next != ',' && next != ']' &&
        next != '%') {
      unsupported(sc.line(), "mpc." + name + ": expressions are not supported inside matrices");
    }
    row.push_back(*v);
  }

  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    if (m.rows[r].size() != m.rows.front().size()) {
      throw Error(ErrorCode::SyntaxError, "mpc." + name + " row " + std::to_string(r + 1) + " (line " +
                                              std::to_string(m.row_lines[r]) + ") has " +
                                              std::to_string(m.rows[r].size()) + " columns, expected " +
                                              std::to_string(m.rows.front().size()));
    }
  }
  return m;
}

void check_columns(const Matrix& m, const std::string& name, std::size_t min_cols, std::size_t known_cols,
                   std::vector<std::string>* warnings) {
  if (m.rows.empty()) return;
  const std::size_t cols = m.rows.front().size();
  if (cols < min_cols) {
    throw Error(ErrorCode::SyntaxError, "mpc." + name + " row 1 (line " + std::to_string(m.row_lines.front()) +
                                            ") has " + std::to_string(cols) + " columns, need at least " +
                                            std::to_string(min_cols));
  }
  if (cols > known_cols && warnings != nullptr) {
    warnings->push_back("mpc." + name + ": ignored " + std::to_string(cols - known_cols) + " trailing column(s)");
  }
}

std::string bus_name(double id) {
  const auto as_int = static_cast<long long>(std::llround(id));
  return std::to_string(as_int);
}

}  // namespace

CaseDocument parse_matpower_subset(std::string_view text, std::vector<std::string>* warnings) {
  Scanner sc(text);
  std::optional<double> base_mva;
  std::map<std::string, Matrix> blocks;
  bool seen_function = false;

  while (!sc.done()) {
    const std::size_t line = sc.line();
    const char c = sc.peek();
    if (!(std::isalpha(static_cast<unsigned char>(c)))) unsupported(line, "unexpected statement");
    const std::string word = sc.identifier();
    if (word == "function") {
      if (seen_function) unsupported(line, "nested or multiple functions are not supported");
      seen_function = true;
      sc.rest_of_line();
      continue;
    }
    if (word.rfind("mpc.", 0) != 0 || word.size() <= 4) unsupported(line, "statement '" + word + "' is not supported");
    const std::string field = word.substr(4);
    sc.skip_space(false);
    if (sc.peek() != '=') unsupported(line, "expected '=' after " + word);
    sc.get();
    sc.skip_space(false);

    const char r = sc.peek();
    if (r == '[') {
      Matrix m = read_matrix(sc, field);
      if (field == "bus" || field == "gen" || field == "branch") {
        blocks[field] = std::move(m);
      } else if (warnings != nullptr) {
        warnings->push_back("mpc." + field + ": block ignored");
      }
    } else if (r == '{') {
      sc.skip_balanced('{', '}');
      if (warnings != nullptr) warnings->push_back("mpc." + field + ": cell block ignored");
    } else if (r == '\'') {
      sc.quoted_string();
    } else {
      auto v = sc.number();
      if (!v) unsupported(line, "mpc." + field + ": unsupported right-hand side");
      if (field == "baseMVA") base_mva = *v;
    }
    sc.skip_space(false);
    if (sc.peek() == ';') sc.get();
    sc.skip_space(false);
    if (sc.peek() != '\n' && sc.peek() != '\0') unsupported(sc.line(), "trailing tokens after mpc." + field);
  }

  if (!blocks.contains("bus") || blocks["bus"].rows.empty()) {
    throw Error(ErrorCode::SchemaError, "missing required block 'mpc.bus'");
  }
  if (!blocks.contains("branch")) throw Error(ErrorCode::SchemaError, "missing required block 'mpc.branch'");
  if (!base_mva) throw Error(ErrorCode::SchemaError, "missing required field 'mpc.baseMVA'");

  const Matrix& bus = blocks["bus"];
  const Matrix& branch = blocks["branch"];
  check_columns(bus, "bus", kBusMinCols, 13, warnings);
  check_columns(branch, "branch", kBranchMinCols, 13, warnings);
  if (blocks.contains("gen")) check_columns(blocks["gen"], "gen", kGenMinCols, 21, warnings);

  CaseDocument doc;
  NetworkData& d = doc.network;
  d.base_mva = *base_mva;
  std::map<std::string, double> kv_of;
  std::map<std::string, BusKind> kind_of;
  for (const auto& row : bus.rows) {
    Bus b;
    b.id = bus_name(row[0]);
    b.name = "Bus " + b.id;
    const int type = static_cast<int>(std::llround(row[1]));
    b.kind = type == 3 ? BusKind::Slack : type == 2 ? BusKind::PV : BusKind::PQ;
    b.in_service = type != 4;
    b.nominal_kv = row[9];
    const double vmax = row[11];
    const double vmin = row[12];
    if (vmin > 0.0 && vmin < vmax) {
      b.v_min_pu = vmin;
      b.v_max_pu = vmax;
    } else if (warnings != nullptr) {
      warnings->push_back("bus " + b.id + ": invalid voltage band, using defaults");
    }
    if ((row[4] != 0.0 || row[5] != 0.0) && warnings != nullptr) {
      warnings->push_back("bus " + b.id + ": shunt ignored");
    }
    kv_of[b.id] = b.nominal_kv;
    kind_of[b.id] = b.kind;
    if (row[2] != 0.0 || row[3] != 0.0) {
      Load l;
      l.id = "L" + b.id;
      l.bus_id = b.id;
      l.p_mw = row[2];
      l.q_mvar = row[3];
      d.loads.push_back(std::move(l));
    }
    d.buses.push_back(std::move(b));
  }

  if (blocks.contains("gen")) {
    std::size_t k = 0;
    for (const auto& row : blocks["gen"].rows) {
      ++k;
      Generator g;
      g.id = "G" + std::to_string(k);
      g.bus_id = bus_name(row[0]);
      if (row[7] <= 0.0) continue;
      auto kind = kind_of.find(g.bus_id);
      if (kind != kind_of.end() && kind->second == BusKind::PQ) {
        if (warnings != nullptr) warnings->push_back("gen " + g.id + " on PQ bus " + g.bus_id + " ignored");
        continue;
      }
      g.p_mw = row[1];
      g.q_max_mvar = row[3];
      g.q_min_mvar = row[4];
      g.v_set_pu = row[5];
      d.generators.push_back(std::move(g));
    }
  }

  std::size_t k = 0;
  for (const auto& row : branch.rows) {
    ++k;
    Branch br;
    br.id = "BR" + std::to_string(k);
    br.from_bus = bus_name(row[0]);
    br.to_bus = bus_name(row[1]);
    auto kv = kv_of.find(br.from_bus);
    if (kv == kv_of.end() || !(kv->second > 0.0)) {
      throw Error(ErrorCode::SemanticError, "branch " + br.id + ": from bus '" + br.from_bus + "' unknown or without kV base");
    }
    br.r_ohm = per_unit::pu_to_ohm(row[2], kv->second, d.base_mva);
    br.x_ohm = per_unit::pu_to_ohm(row[3], kv->second, d.base_mva);
    br.b_total_shunt_siemens = per_unit::pu_to_siemens(row[4], kv->second, d.base_mva);
    br.s_max_mva = row[5] > 0.0 ? row[5] : kPlaceholderRatingMva;
    br.i_max_ka = br.s_max_mva / (1.7320508075688772 * kv->second);
    br.in_service = row[10] > 0.0;
    if (((row[8] != 0.0 && row[8] != 1.0) || row[9] != 0.0) && warnings != nullptr) {
      warnings->push_back("branch " + br.id + ": off-nominal tap/phase shift ignored");
    }
    d.branches.push_back(std::move(br));
  }

  try {
    build_network(d);
  } catch (const Error& e) {
    throw Error(ErrorCode::SemanticError, e.what());
  }
  return doc;
}

}  // namespace gridagent
