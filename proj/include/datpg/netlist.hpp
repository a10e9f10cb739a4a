#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "datpg/error.hpp"

namespace datpg {

enum class GateType : std::uint8_t {
  kAnd,
  kNand,
  kOr,
  kNor,
  kXor,
  kXnor,
  kNot,
  kBuf,
  kInput,
  kOutput,
};

std::string_view to_string(GateType type);
// Accepts the .bench spellings (case-insensitive), including BUFF.
std::optional<GateType> gate_type_from_string(std::string_view name);

// Minimum and maximum fan-in count allowed for a gate kind.
struct Arity {
  std::size_t min;
  std::size_t max;
};
Arity arity_of(GateType type);

struct Gate {
  std::string output;
  GateType type;
  std::vector<std::string> fanins;
};

// A combinational gate-level circuit. Primary-input order defines the bit
// order of every pattern handled by the library.
struct Netlist {
  std::vector<std::string> nets;  // every named net, first-appearance order
  std::vector<Gate> gates;
  std::vector<std::string> primary_inputs;
  std::vector<std::string> primary_outputs;
};

enum class DiagnosticKind {
  kSyntax,
  kUndrivenNet,
  kMultipleDrivers,
  kCycleDetected,
  kUnknownGateType,
  kArityViolation,
};

std::string_view to_string(DiagnosticKind kind);

struct Diagnostic {
  DiagnosticKind kind;
  std::vector<std::string> nets;
  int line = 0;  // 1-based source line, 0 when not tied to a line
  std::string message;

  std::string format() const;
};

class ParseError : public Error {
 public:
  explicit ParseError(std::vector<Diagnostic> diagnostics);

  const std::vector<Diagnostic>& diagnostics() const noexcept {
    return diagnostics_;
  }

 private:
  std::vector<Diagnostic> diagnostics_;
};

// Parses the ISCAS-85 .bench dialect and validates the result. Throws
// ParseError carrying every diagnostic found.
Netlist parse_bench(std::string_view text);
Netlist read_bench_file(const std::string& path);

// Empty iff the netlist is a well-formed acyclic combinational circuit.
std::vector<Diagnostic> validate(const Netlist& netlist);

std::string write_bench(const Netlist& netlist);

}  // namespace datpg
