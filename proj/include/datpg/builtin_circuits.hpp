#pragma once

#include <cstdint>
#include <string_view>

#include "datpg/netlist.hpp"

namespace datpg {

// ISCAS-85 c17 in .bench form.
std::string_view c17_bench();
// z = XNOR(a, b); its output stuck-at-1 is detected only by 01 and 10.
std::string_view xnor_bench();
// z = OR(a, AND(a, b)); the AND output stuck-at-0 is redundant.
std::string_view redundant_bench();

struct RandomCircuitOptions {
  std::size_t num_pis = 8;
  std::size_t num_gates = 40;
  std::size_t max_fanin = 3;
  bool allow_parity = true;  // XOR / XNOR
};

// Random levelized combinational DAG, about sqrt(num_gates) levels deep.
// Fan-ins favour nets that have no sink yet, so most logic is observable;
// every net left without a sink becomes a PO.
Netlist random_circuit(const RandomCircuitOptions& options, std::uint64_t seed);

// Ripple chain c_{k+1} = AND(OR(AND(c_k, p_k), AND(c_k, q_k)), r_k) with c_k
// reconverging at every stage. Depth grows by four graph levels per stage,
// and the relaxed sensitivity of the output to c_0 shrinks geometrically.
Netlist reconvergent_chain(std::size_t stages);

}  // namespace datpg
