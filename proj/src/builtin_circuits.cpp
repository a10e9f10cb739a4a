#include "datpg/builtin_circuits.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace datpg {

std::string_view c17_bench() {
  return R"(# c17
INPUT(1)
INPUT(2)
INPUT(3)
INPUT(6)
INPUT(7)
OUTPUT(22)
OUTPUT(23)
10 = NAND(1, 3)
11 = NAND(3, 6)
16 = NAND(2, 11)
19 = NAND(11, 7)
22 = NAND(10, 16)
23 = NAND(16, 19)
)";
}

std::string_view xnor_bench() {
  return "INPUT(a)\nINPUT(b)\nOUTPUT(z)\nz = XNOR(a, b)\n";
}

std::string_view redundant_bench() {
  return "INPUT(a)\nINPUT(b)\nOUTPUT(z)\ny = AND(a, b)\nz = OR(a, y)\n";
}

Netlist random_circuit(const RandomCircuitOptions& options, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Netlist nl;
  std::vector<std::size_t> sinks;
  std::vector<std::size_t> level_begin{0};
  for (std::size_t i = 0; i < options.num_pis; ++i) {
    nl.primary_inputs.push_back(fmt::format("i{}", i));
    nl.nets.push_back(nl.primary_inputs.back());
    sinks.push_back(0);
  }
  const std::vector<GateType> kinds =
      options.allow_parity
          ? std::vector<GateType>{GateType::kAnd, GateType::kNand, GateType::kOr,
                                  GateType::kNor, GateType::kXor, GateType::kXnor,
                                  GateType::kNot, GateType::kBuf}
          : std::vector<GateType>{GateType::kAnd, GateType::kNand, GateType::kOr,
                                  GateType::kNor, GateType::kNot};
  // Gates are spread over about sqrt(num_gates) levels; the first fan-in of
  // a gate comes from the level just below it, the rest from anywhere below.
  const std::size_t depth = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(options.num_gates)))));
  std::size_t made = 0;
  for (std::size_t l = 1; l <= depth && made < options.num_gates; ++l) {
    level_begin.push_back(nl.nets.size());
    const std::size_t below_begin = level_begin[l - 1];
    const std::size_t below_end = level_begin[l];
    const std::size_t count = (options.num_gates - made) / (depth - l + 1);
    auto pick = [&](std::size_t lo, std::size_t hi) {
      std::vector<std::size_t> unused;
      for (std::size_t k = lo; k < hi; ++k) {
        if (sinks[k] == 0) unused.push_back(k);
      }
      if (!unused.empty() && gen() % 2 == 0) return unused[gen() % unused.size()];
      return lo + gen() % (hi - lo);
    };
    for (std::size_t c = 0; c < count; ++c, ++made) {
      const GateType type = kinds[gen() % kinds.size()];
      const bool unary = type == GateType::kNot || type == GateType::kBuf;
      const std::size_t want =
          unary ? 1 : 2 + gen() % std::max<std::size_t>(1, options.max_fanin - 1);
      std::vector<std::size_t> picked{pick(below_begin, below_end)};
      for (std::size_t guard = 0; picked.size() < want && guard < 64; ++guard) {
        const std::size_t cand = pick(0, below_end);
        if (std::find(picked.begin(), picked.end(), cand) == picked.end()) picked.push_back(cand);
      }
      Gate gate{fmt::format("g{}", made), picked.size() == 1 && !unary ? GateType::kBuf : type, {}};
      for (std::size_t k : picked) {
        gate.fanins.push_back(nl.nets[k]);
        ++sinks[k];
      }
      nl.gates.push_back(std::move(gate));
      nl.nets.push_back(nl.gates.back().output);
      sinks.push_back(0);
    }
  }
  for (std::size_t k = options.num_pis; k < nl.nets.size(); ++k) {
    if (sinks[k] == 0) nl.primary_outputs.push_back(nl.nets[k]);
  }
  if (nl.primary_outputs.empty()) nl.primary_outputs.push_back(nl.nets.back());
  return nl;
}

Netlist reconvergent_chain(std::size_t stages) {
  Netlist nl;
  auto input = [&](std::string name) {
    nl.primary_inputs.push_back(name);
    nl.nets.push_back(std::move(name));
  };
  auto gate = [&](std::string out, GateType type, std::vector<std::string> in) {
    nl.nets.push_back(out);
    nl.gates.push_back({std::move(out), type, std::move(in)});
  };
  input("c0");
  for (std::size_t k = 0; k < stages; ++k) {
    input(fmt::format("p{}", k));
    input(fmt::format("q{}", k));
    input(fmt::format("r{}", k));
  }
  for (std::size_t k = 0; k < stages; ++k) {
    const std::string c = fmt::format("c{}", k);
    gate(fmt::format("u{}", k), GateType::kAnd, {c, fmt::format("p{}", k)});
    gate(fmt::format("v{}", k), GateType::kAnd, {c, fmt::format("q{}", k)});
    gate(fmt::format("w{}", k), GateType::kOr, {fmt::format("u{}", k), fmt::format("v{}", k)});
    gate(fmt::format("c{}", k + 1), GateType::kAnd, {fmt::format("w{}", k), fmt::format("r{}", k)});
  }
  nl.primary_outputs.push_back(fmt::format("c{}", stages));
  return nl;
}

}  // namespace datpg
