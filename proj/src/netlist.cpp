#include "datpg/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace datpg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kFaultList: return "FaultListError";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kPatternLengthMismatch: return "PatternLengthMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kTapeMismatch: return "TapeMismatch";
    case ErrorCode::kFaultSiteInvalid: return "FaultSiteInvalid";
    case ErrorCode::kTooManyInputs: return "TooManyInputs";
    case ErrorCode::kNonpositiveTemperature: return "NonpositiveTemperature";
    case ErrorCode::kNegativeLambda: return "NegativeLambda";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kNonFiniteUpdate: return "NonFiniteUpdate";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(GateType type) {
  switch (type) {
    case GateType::kAnd: return "AND";
    case GateType::kNand: return "NAND";
    case GateType::kOr: return "OR";
    case GateType::kNor: return "NOR";
    case GateType::kXor: return "XOR";
    case GateType::kXnor: return "XNOR";
    case GateType::kNot: return "NOT";
    case GateType::kBuf: return "BUF";
    case GateType::kInput: return "INPUT";
    case GateType::kOutput: return "OUTPUT";
  }
  return "?";
}

std::optional<GateType> gate_type_from_string(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  static const std::unordered_map<std::string, GateType> kTypes = {
      {"AND", GateType::kAnd},   {"NAND", GateType::kNand},
      {"OR", GateType::kOr},     {"NOR", GateType::kNor},
      {"XOR", GateType::kXor},   {"XNOR", GateType::kXnor},
      {"NOT", GateType::kNot},   {"INV", GateType::kNot},
      {"BUF", GateType::kBuf},   {"BUFF", GateType::kBuf},
  };
  auto it = kTypes.find(upper);
  if (it == kTypes.end()) return std::nullopt;
  return it->second;
}

Arity arity_of(GateType type) {
  constexpr std::size_t kUnbounded = static_cast<std::size_t>(-1);
  switch (type) {
    case GateType::kNot:
    case GateType::kBuf:
    case GateType::kOutput:
      return {1, 1};
    case GateType::kInput:
      return {0, 0};
    default:
      return {2, kUnbounded};
  }
}

std::string_view to_string(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::kSyntax: return "SyntaxError";
    case DiagnosticKind::kUndrivenNet: return "UndrivenNet";
    case DiagnosticKind::kMultipleDrivers: return "MultipleDrivers";
    case DiagnosticKind::kCycleDetected: return "CycleDetected";
    case DiagnosticKind::kUnknownGateType: return "UnknownGateType";
    case DiagnosticKind::kArityViolation: return "ArityViolation";
  }
  return "?";
}

std::string Diagnostic::format() const {
  std::ostringstream os;
  os << to_string(kind);
  if (!nets.empty()) {
    os << "(";
    for (std::size_t i = 0; i < nets.size(); ++i) {
      if (i) os << ",";
      os << nets[i];
    }
    os << ")";
  }
  if (line > 0) os << " at line " << line;
  if (!message.empty()) os << ": " << message;
  return os.str();
}

namespace {

std::string join_diagnostics(const std::vector<Diagnostic>& diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) {
    if (!out.empty()) out += "; ";
    out += d.format();
  }
  return out;
}

bool is_name_char(char c) {
  return !std::isspace(static_cast<unsigned char>(c)) && c != '(' &&
         c != ')' && c != ',' && c != '=' && c != '#';
}

// Cursor over one comment-stripped line.
class LineLexer {
 public:
  explicit LineLexer(std::string_view text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string_view name() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_name_char(text_[pos_])) ++pos_;
    return text_.substr(start, pos_ - start);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

Diagnostic syntax_error(int line, std::string message) {
  return Diagnostic{DiagnosticKind::kSyntax, {}, line, std::move(message)};
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::toupper(static_cast<unsigned char>(a[i])) !=
        std::toupper(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

class NetTable {
 public:
  explicit NetTable(std::vector<std::string>& nets) : nets_(nets) {
    for (const auto& n : nets_) index_.emplace(n, index_.size());
  }
  void note(const std::string& name) {
    if (index_.emplace(name, nets_.size()).second) nets_.push_back(name);
  }

 private:
  std::vector<std::string>& nets_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace

ParseError::ParseError(std::vector<Diagnostic> diagnostics)
    : Error(ErrorCode::kParse, join_diagnostics(diagnostics)),
      diagnostics_(std::move(diagnostics)) {}

Netlist parse_bench(std::string_view text) {
  Netlist netlist;
  NetTable table(netlist.nets);
  std::vector<Diagnostic> diagnostics;

  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    LineLexer lex(line);
    if (lex.at_end()) {
      if (end == text.size()) break;
      continue;
    }

    std::string_view first = lex.name();
    if (first.empty()) {
      throw ParseError({syntax_error(line_no, "expected a name")});
    }
    const bool is_input = iequals(first, "INPUT");
    const bool is_output = iequals(first, "OUTPUT");
    if ((is_input || is_output) && lex.consume('(')) {
      std::string net(lex.name());
      if (net.empty() || !lex.consume(')') || !lex.at_end()) {
        throw ParseError(
            {syntax_error(line_no, "malformed INPUT/OUTPUT declaration")});
      }
      table.note(net);
      (is_input ? netlist.primary_inputs : netlist.primary_outputs)
          .push_back(std::move(net));
    } else {
      std::string output(first);
      if (!lex.consume('=')) {
        throw ParseError({syntax_error(line_no, "expected '='")});
      }
      std::string_view type_name = lex.name();
      if (type_name.empty() || !lex.consume('(')) {
        throw ParseError({syntax_error(line_no, "expected GATE(...)")});
      }
      std::vector<std::string> fanins;
      if (!lex.consume(')')) {
        do {
          std::string_view arg = lex.name();
          if (arg.empty()) {
            throw ParseError({syntax_error(line_no, "empty fan-in name")});
          }
          fanins.emplace_back(arg);
        } while (lex.consume(','));
        if (!lex.consume(')')) {
          throw ParseError({syntax_error(line_no, "expected ')'")});
        }
      }
      if (!lex.at_end()) {
        throw ParseError({syntax_error(line_no, "trailing characters")});
      }
      table.note(output);
      for (const auto& f : fanins) table.note(f);
      auto type = gate_type_from_string(type_name);
      if (!type) {
        diagnostics.push_back({DiagnosticKind::kUnknownGateType,
                               {output},
                               line_no,
                               "gate type '" + std::string(type_name) + "'"});
        continue;
      }
      netlist.gates.push_back({std::move(output), *type, std::move(fanins)});
    }
    if (end == text.size()) break;
  }

  if (!diagnostics.empty()) throw ParseError(std::move(diagnostics));
  auto problems = validate(netlist);
  if (!problems.empty()) throw ParseError(std::move(problems));
  return netlist;
}

Netlist read_bench_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError({Diagnostic{DiagnosticKind::kSyntax, {}, 0,
                                 "cannot open netlist file '" + path + "'"}});
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_bench(buffer.str());
}

std::vector<Diagnostic> validate(const Netlist& netlist) {
  std::vector<Diagnostic> out;

  for (const auto& gate : netlist.gates) {
    const Arity a = arity_of(gate.type);
    if (gate.type == GateType::kInput || gate.type == GateType::kOutput ||
        gate.fanins.size() < a.min || gate.fanins.size() > a.max) {
      out.push_back({DiagnosticKind::kArityViolation,
                     {gate.output},
                     0,
                     std::string(to_string(gate.type)) + " with " +
                         std::to_string(gate.fanins.size()) + " fan-ins"});
    }
  }

  // Stable net ordering: declared nets first, then anything else referenced.
  std::vector<std::string> order = netlist.nets;
  std::unordered_map<std::string, int> net_id;
  for (const auto& n : order) net_id.emplace(n, static_cast<int>(net_id.size()));
  auto id_of = [&](const std::string& n) {
    auto [it, inserted] = net_id.emplace(n, static_cast<int>(order.size()));
    if (inserted) order.push_back(n);
    return it->second;
  };
  for (const auto& pi : netlist.primary_inputs) id_of(pi);
  for (const auto& g : netlist.gates) {
    id_of(g.output);
    for (const auto& f : g.fanins) id_of(f);
  }
  for (const auto& po : netlist.primary_outputs) id_of(po);

  const std::size_t n = order.size();
  std::vector<int> driver_count(n, 0);
  std::vector<int> driver_gate(n, -1);
  for (const auto& pi : netlist.primary_inputs) ++driver_count[id_of(pi)];
  for (std::size_t g = 0; g < netlist.gates.size(); ++g) {
    const int id = id_of(netlist.gates[g].output);
    ++driver_count[id];
    if (driver_gate[id] < 0) driver_gate[id] = static_cast<int>(g);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (driver_count[i] > 1) {
      out.push_back({DiagnosticKind::kMultipleDrivers, {order[i]}, 0, ""});
    }
  }

  std::vector<bool> reported_undriven(n, false);
  auto check_driven = [&](const std::string& net) {
    const int id = id_of(net);
    if (driver_count[id] == 0 && !reported_undriven[id]) {
      reported_undriven[id] = true;
      out.push_back({DiagnosticKind::kUndrivenNet, {net}, 0, ""});
    }
  };
  for (const auto& g : netlist.gates) {
    for (const auto& f : g.fanins) check_driven(f);
  }
  for (const auto& po : netlist.primary_outputs) check_driven(po);

  // Iterative DFS over the net dependency relation; a back edge closes a
  // cycle whose members are read off the explicit stack.
  enum : std::uint8_t { kWhite, kGrey, kBlack };
  std::vector<std::uint8_t> color(n, kWhite);
  struct Frame {
    int net;
    std::size_t next_fanin;
  };
  std::vector<Frame> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (color[root] != kWhite || driver_gate[root] < 0) continue;
    stack.push_back({static_cast<int>(root), 0});
    color[root] = kGrey;
    while (!stack.empty()) {
      Frame& top = stack.back();
      const int g = driver_gate[top.net];
      const auto* fanins = g >= 0 ? &netlist.gates[g].fanins : nullptr;
      if (!fanins || top.next_fanin >= fanins->size()) {
        color[top.net] = kBlack;
        stack.pop_back();
        continue;
      }
      const int next = id_of((*fanins)[top.next_fanin++]);
      if (color[next] == kWhite) {
        color[next] = kGrey;
        stack.push_back({next, 0});
      } else if (color[next] == kGrey) {
        std::vector<int> cycle;
        auto it = std::find_if(stack.begin(), stack.end(),
                               [&](const Frame& f) { return f.net == next; });
        for (; it != stack.end(); ++it) cycle.push_back(it->net);
        std::rotate(cycle.begin(), std::min_element(cycle.begin(), cycle.end()),
                    cycle.end());
        Diagnostic d{DiagnosticKind::kCycleDetected, {}, 0, ""};
        for (int c : cycle) d.nets.push_back(order[c]);
        out.push_back(std::move(d));
      }
    }
  }
  return out;
}

std::string write_bench(const Netlist& netlist) {
  std::ostringstream os;
  for (const auto& pi : netlist.primary_inputs) os << "INPUT(" << pi << ")\n";
  for (const auto& po : netlist.primary_outputs) os << "OUTPUT(" << po << ")\n";
  for (const auto& g : netlist.gates) {
    os << g.output << " = " << to_string(g.type) << "(";
    for (std::size_t i = 0; i < g.fanins.size(); ++i) {
      if (i) os << ", ";
      os << g.fanins[i];
    }
    os << ")\n";
  }
  return os.str();
}

}  // namespace datpg
