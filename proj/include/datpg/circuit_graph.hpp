#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "datpg/netlist.hpp"

namespace datpg {

using NodeId = std::int32_t;

enum class NodeKind : std::uint8_t {
  kInput,
  kAnd,
  kNand,
  kOr,
  kNor,
  kXor,
  kXnor,
  kNot,
  kBuf,
  kBranch,  // identity node for one sink of a multi-fanout net
  kConst0,
  kConst1,
};

NodeKind node_kind_of(GateType type);
std::string_view to_string(NodeKind kind);

// Where a node came from in the netlist. For branch nodes `net` is the stem
// net and (`sink_gate`, `sink_pin`) the consuming gate pin; a primary-output
// sink is encoded as sink_gate = -1 - po_index.
struct NodeOrigin {
  std::int32_t net = -1;
  std::int32_t sink_gate = -1;
  std::int32_t sink_pin = -1;
};

// Levelized DAG with a node-centric CSR fan-in layout. Nodes at level 0 are
// primary inputs and constants; every other node sits one level above its
// deepest fan-in.
struct CircuitGraph {
  std::vector<NodeKind> kinds;
  std::vector<NodeOrigin> origins;
  std::vector<std::string> labels;  // unique printable name per node

  std::vector<std::int32_t> fanin_ptr;  // size() + 1 offsets
  std::vector<NodeId> fanin_src;
  std::vector<std::int32_t> fanout_ptr;
  std::vector<NodeId> fanout_dst;

  std::vector<std::int32_t> level_of;
  std::vector<std::vector<NodeId>> levels;

  std::vector<NodeId> pi_nodes;
  std::vector<NodeId> po_nodes;

  std::vector<std::string> net_names;
  std::vector<std::string> gate_outputs;  // netlist gate index -> output net

  std::size_t size() const { return kinds.size(); }
  std::size_t num_pis() const { return pi_nodes.size(); }
  std::size_t num_pos() const { return po_nodes.size(); }
  std::size_t num_levels() const { return levels.size(); }

  std::span<const NodeId> fanins(NodeId v) const {
    return {fanin_src.data() + fanin_ptr[v],
            static_cast<std::size_t>(fanin_ptr[v + 1] - fanin_ptr[v])};
  }
  std::span<const NodeId> fanouts(NodeId v) const {
    return {fanout_dst.data() + fanout_ptr[v],
            static_cast<std::size_t>(fanout_ptr[v + 1] - fanout_ptr[v])};
  }
};

CircuitGraph build_graph(const Netlist& netlist);

// Rebuilds fanout CSR, levels and level arrays from kinds + fan-in CSR.
void relevelize(CircuitGraph& graph);

// Text table (id, kind, level, label, fan-ins) for diffing.
std::string dump_graph(const CircuitGraph& graph);

struct FaultSpec {
  NodeId site = -1;
  std::uint8_t stuck_value = 0;

  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

std::string fault_label(const CircuitGraph& graph, const FaultSpec& fault);

// Transitive fan-out of `site` including the site, sorted by (level, id).
std::vector<NodeId> fanout_cone(const CircuitGraph& graph, NodeId site);

// One fault's view inside a fault-included arena.
struct FaultView {
  FaultSpec fault;
  // (faulty copy, original) pairs for the duplicated cone only.
  std::vector<std::pair<NodeId, NodeId>> dup_map;
  // Aligned with po_nodes; equals po_nodes[j] for outputs outside the cone.
  std::vector<NodeId> faulty_po_nodes;
  // Output indices j whose faulty node differs from the fault-free one.
  std::vector<std::int32_t> observed_pos;
};

// Shared fault-free graph plus one independently duplicated cone per fault,
// all in a single levelized arena. Arena nodes [0, base_size) are exactly
// the base graph.
struct FaultGraph {
  std::size_t base_size = 0;
  CircuitGraph arena;
  std::vector<FaultView> views;
};

FaultGraph build_fault_graph(const CircuitGraph& graph, const FaultSpec& fault);
FaultGraph merge_fault_graphs(const CircuitGraph& graph,
                              std::span<const FaultSpec> faults);

// Both polarities at every primary input, gate output and branch node.
std::vector<FaultSpec> collapsed_faults(const CircuitGraph& graph);

// Fault list file: one `site stuck_value` per line, branch sites written as
// `stem->sink`. Blank lines and `#` comments are ignored.
std::vector<FaultSpec> parse_fault_list(const CircuitGraph& graph,
                                        std::string_view text);
std::vector<FaultSpec> read_fault_list_file(const CircuitGraph& graph,
                                            const std::string& path);
std::string write_fault_list(const CircuitGraph& graph,
                             std::span<const FaultSpec> faults);

// Looks up a node by its label; -1 when absent.
NodeId find_node(const CircuitGraph& graph, std::string_view label);

}  // namespace datpg
