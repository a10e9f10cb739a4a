#include <doctest.h>

#include <algorithm>

#include "datpg/builtin_circuits.hpp"
#include "datpg/netlist.hpp"

using namespace datpg;

namespace {

std::vector<Diagnostic> diagnostics_of(std::string_view text) {
  try {
    parse_bench(text);
  } catch (const ParseError& e) {
    return e.diagnostics();
  }
  return {};
}

bool has_kind(const std::vector<Diagnostic>& d, DiagnosticKind k) {
  return std::any_of(d.begin(), d.end(), [k](const Diagnostic& x) { return x.kind == k; });
}

}  // namespace

TEST_SUITE("netlist") {

TEST_CASE("xnor and c17 parse") {
  const Netlist x = parse_bench(xnor_bench());
  CHECK(x.primary_inputs.size() == 2);
  CHECK(x.primary_outputs.size() == 1);
  REQUIRE(x.gates.size() == 1);
  CHECK(x.gates[0].type == GateType::kXnor);

  const Netlist c = parse_bench(c17_bench());
  CHECK(c.primary_inputs.size() == 5);
  CHECK(c.primary_outputs.size() == 2);
  CHECK(c.gates.size() == 6);
  CHECK(std::all_of(c.gates.begin(), c.gates.end(),
                    [](const Gate& g) { return g.type == GateType::kNand; }));
  CHECK(validate(c).empty());
}

TEST_CASE("gate spellings") {
  CHECK(gate_type_from_string("buff") == GateType::kBuf);
  CHECK(gate_type_from_string("BUF") == GateType::kBuf);
  CHECK(gate_type_from_string("Nand") == GateType::kNand);
  CHECK_FALSE(gate_type_from_string("MUX").has_value());
}

TEST_CASE("arity violation") {
  const auto d = diagnostics_of("INPUT(a)\nOUTPUT(z)\nz = AND(a)\n");
  CHECK(has_kind(d, DiagnosticKind::kArityViolation));
  CHECK(has_kind(diagnostics_of("INPUT(a)\nINPUT(b)\nOUTPUT(z)\nz = NOT(a, b)\n"),
                 DiagnosticKind::kArityViolation));
}

TEST_CASE("multiple drivers name the net") {
  const auto d = diagnostics_of(
      "INPUT(a)\nINPUT(b)\nOUTPUT(w)\nw = AND(a, b)\nw = OR(a, b)\n");
  REQUIRE(d.size() == 1);
  CHECK(d[0].kind == DiagnosticKind::kMultipleDrivers);
  CHECK(d[0].nets == std::vector<std::string>{"w"});
}

TEST_CASE("cycle reports its nets") {
  const auto d = diagnostics_of("INPUT(x)\nOUTPUT(a)\na = AND(x, b)\nb = BUF(a)\n");
  REQUIRE(has_kind(d, DiagnosticKind::kCycleDetected));
  const auto it = std::find_if(d.begin(), d.end(), [](const Diagnostic& x) {
    return x.kind == DiagnosticKind::kCycleDetected;
  });
  CHECK(it->nets == std::vector<std::string>{"a", "b"});
}

TEST_CASE("undriven and unknown") {
  CHECK(has_kind(diagnostics_of("INPUT(a)\nOUTPUT(z)\nz = AND(a, q)\n"),
                 DiagnosticKind::kUndrivenNet));
  CHECK(has_kind(diagnostics_of("INPUT(a)\nINPUT(b)\nOUTPUT(z)\nz = MUX(a, b)\n"),
                 DiagnosticKind::kUnknownGateType));
  const auto syntax = diagnostics_of("INPUT(a\n");
  REQUIRE_FALSE(syntax.empty());
  CHECK(syntax[0].kind == DiagnosticKind::kSyntax);
  CHECK(syntax[0].line == 1);
}

TEST_CASE("comments, blank lines and round trip") {
  const Netlist a = parse_bench("# header\n\nINPUT(a)  # pi\nINPUT(b)\nOUTPUT(z)\nz = xor(a, b)\n");
  CHECK(a.gates.size() == 1);
  const Netlist c = parse_bench(c17_bench());
  const Netlist again = parse_bench(write_bench(c));
  CHECK(again.primary_inputs == c.primary_inputs);
  CHECK(again.primary_outputs == c.primary_outputs);
  REQUIRE(again.gates.size() == c.gates.size());
  for (std::size_t g = 0; g < c.gates.size(); ++g) {
    CHECK(again.gates[g].output == c.gates[g].output);
    CHECK(again.gates[g].fanins == c.gates[g].fanins);
  }
}

TEST_CASE("missing file is a parse error") {
  CHECK_THROWS_AS(read_bench_file("/nonexistent/x.bench"), ParseError);
}

TEST_CASE("generated circuits validate") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomCircuitOptions opt;
    opt.num_pis = 3 + seed % 6;
    opt.num_gates = 10 + 7 * seed;
    CHECK(validate(random_circuit(opt, seed)).empty());
  }
  CHECK(validate(reconvergent_chain(10)).empty());
}

}  // TEST_SUITE
