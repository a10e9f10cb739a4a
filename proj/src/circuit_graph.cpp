#include "datpg/circuit_graph.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace datpg {

NodeKind node_kind_of(GateType type) {
  switch (type) {
    case GateType::kAnd: return NodeKind::kAnd;
    case GateType::kNand: return NodeKind::kNand;
    case GateType::kOr: return NodeKind::kOr;
    case GateType::kNor: return NodeKind::kNor;
    case GateType::kXor: return NodeKind::kXor;
    case GateType::kXnor: return NodeKind::kXnor;
    case GateType::kNot: return NodeKind::kNot;
    case GateType::kBuf:
    case GateType::kOutput: return NodeKind::kBuf;
    case GateType::kInput: return NodeKind::kInput;
  }
  return NodeKind::kBuf;
}

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::kInput: return "INPUT";
    case NodeKind::kAnd: return "AND";
    case NodeKind::kNand: return "NAND";
    case NodeKind::kOr: return "OR";
    case NodeKind::kNor: return "NOR";
    case NodeKind::kXor: return "XOR";
    case NodeKind::kXnor: return "XNOR";
    case NodeKind::kNot: return "NOT";
    case NodeKind::kBuf: return "BUF";
    case NodeKind::kBranch: return "BRANCH";
    case NodeKind::kConst0: return "CONST0";
    case NodeKind::kConst1: return "CONST1";
  }
  return "?";
}

void relevelize(CircuitGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::int32_t> out_degree(n, 0);
  for (NodeId u : g.fanin_src) ++out_degree[u];
  g.fanout_ptr.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) {
    g.fanout_ptr[v + 1] = g.fanout_ptr[v] + out_degree[v];
  }
  g.fanout_dst.assign(g.fanin_src.size(), 0);
  std::vector<std::int32_t> cursor(g.fanout_ptr.begin(), g.fanout_ptr.end() - 1);
  for (std::size_t v = 0; v < n; ++v) {
    for (NodeId u : g.fanins(static_cast<NodeId>(v))) {
      g.fanout_dst[cursor[u]++] = static_cast<NodeId>(v);
    }
  }

  // Kahn order; ASAP level = 1 + deepest fan-in.
  std::vector<std::int32_t> pending(n);
  std::vector<NodeId> queue;
  queue.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    pending[v] = g.fanin_ptr[v + 1] - g.fanin_ptr[v];
    if (pending[v] == 0) queue.push_back(static_cast<NodeId>(v));
  }
  g.level_of.assign(n, 0);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const NodeId u = queue[head];
    for (NodeId v : g.fanouts(u)) {
      g.level_of[v] = std::max(g.level_of[v], g.level_of[u] + 1);
      if (--pending[v] == 0) queue.push_back(v);
    }
  }
  if (queue.size() != n) {
    throw Error(ErrorCode::kParse, "graph contains a cycle");
  }
  std::int32_t max_level = 0;
  for (auto l : g.level_of) max_level = std::max(max_level, l);
  g.levels.assign(n ? static_cast<std::size_t>(max_level) + 1 : 0, {});
  for (std::size_t v = 0; v < n; ++v) {
    g.levels[g.level_of[v]].push_back(static_cast<NodeId>(v));
  }
}

CircuitGraph build_graph(const Netlist& netlist) {
  CircuitGraph g;

  std::unordered_map<std::string, std::int32_t> net_id;
  auto id_of = [&](const std::string& name) {
    auto [it, inserted] =
        net_id.emplace(name, static_cast<std::int32_t>(g.net_names.size()));
    if (inserted) g.net_names.push_back(name);
    return it->second;
  };
  for (const auto& n : netlist.nets) id_of(n);
  for (const auto& pi : netlist.primary_inputs) id_of(pi);
  for (const auto& gate : netlist.gates) {
    id_of(gate.output);
    for (const auto& f : gate.fanins) id_of(f);
  }
  for (const auto& po : netlist.primary_outputs) id_of(po);
  const std::size_t num_nets = g.net_names.size();

  std::vector<NodeId> driver(num_nets, -1);
  for (const auto& pi : netlist.primary_inputs) {
    const NodeId v = static_cast<NodeId>(g.kinds.size());
    g.kinds.push_back(NodeKind::kInput);
    g.origins.push_back({id_of(pi), -1, -1});
    driver[id_of(pi)] = v;
    g.pi_nodes.push_back(v);
  }
  for (std::size_t k = 0; k < netlist.gates.size(); ++k) {
    const auto& gate = netlist.gates[k];
    const NodeId v = static_cast<NodeId>(g.kinds.size());
    g.kinds.push_back(node_kind_of(gate.type));
    g.origins.push_back({id_of(gate.output), -1, -1});
    driver[id_of(gate.output)] = v;
    g.gate_outputs.push_back(gate.output);
  }
  for (std::size_t net = 0; net < num_nets; ++net) {
    if (driver[net] < 0) {
      throw Error(ErrorCode::kParse,
                  "net '" + g.net_names[net] + "' has no driver");
    }
  }

  // Sinks of every net: gate pins in gate order, then primary outputs.
  struct Sink {
    std::int32_t gate;
    std::int32_t pin;
  };
  std::vector<std::vector<Sink>> sinks(num_nets);
  for (std::size_t k = 0; k < netlist.gates.size(); ++k) {
    const auto& fanins = netlist.gates[k].fanins;
    for (std::size_t p = 0; p < fanins.size(); ++p) {
      sinks[id_of(fanins[p])].push_back(
          {static_cast<std::int32_t>(k), static_cast<std::int32_t>(p)});
    }
  }
  for (std::size_t j = 0; j < netlist.primary_outputs.size(); ++j) {
    sinks[id_of(netlist.primary_outputs[j])].push_back(
        {-1 - static_cast<std::int32_t>(j), -1});
  }

  // Branch node for each sink of a multi-fanout net.
  std::vector<std::vector<NodeId>> gate_pin_src(netlist.gates.size());
  for (std::size_t k = 0; k < netlist.gates.size(); ++k) {
    gate_pin_src[k].assign(netlist.gates[k].fanins.size(), -1);
  }
  g.po_nodes.assign(netlist.primary_outputs.size(), -1);
  std::vector<NodeId> branch_src;
  for (std::size_t net = 0; net < num_nets; ++net) {
    const bool split = sinks[net].size() > 1;
    for (const Sink& s : sinks[net]) {
      NodeId src = driver[net];
      if (split) {
        src = static_cast<NodeId>(g.kinds.size());
        g.kinds.push_back(NodeKind::kBranch);
        g.origins.push_back({static_cast<std::int32_t>(net), s.gate, s.pin});
        branch_src.push_back(driver[net]);
      }
      if (s.gate >= 0) {
        gate_pin_src[s.gate][s.pin] = src;
      } else {
        g.po_nodes[-1 - s.gate] = src;
      }
    }
  }

  const std::size_t num_gates = netlist.gates.size();
  const std::size_t first_branch = g.pi_nodes.size() + num_gates;
  g.fanin_ptr.assign(1, 0);
  for (std::size_t v = 0; v < g.kinds.size(); ++v) {
    if (v < g.pi_nodes.size()) {
      // no fan-ins
    } else if (v < first_branch) {
      const auto& pins = gate_pin_src[v - g.pi_nodes.size()];
      g.fanin_src.insert(g.fanin_src.end(), pins.begin(), pins.end());
    } else {
      g.fanin_src.push_back(branch_src[v - first_branch]);
    }
    g.fanin_ptr.push_back(static_cast<std::int32_t>(g.fanin_src.size()));
  }

  // Labels: net name for stems, `stem->sink` for branches; duplicates get a
  // `#k` suffix so every label resolves to exactly one node.
  std::unordered_map<std::string, int> seen;
  g.labels.reserve(g.kinds.size());
  for (std::size_t v = 0; v < g.kinds.size(); ++v) {
    const NodeOrigin& o = g.origins[v];
    std::string label = g.net_names[o.net];
    if (g.kinds[v] == NodeKind::kBranch) {
      label += "->";
      label += o.sink_gate >= 0 ? g.gate_outputs[o.sink_gate] : "PO";
    }
    const int count = ++seen[label];
    if (count > 1) label += "#" + std::to_string(count);
    g.labels.push_back(std::move(label));
  }

  relevelize(g);
  return g;
}

std::string dump_graph(const CircuitGraph& g) {
  std::ostringstream os;
  os << "# id kind level label fanins\n";
  for (std::size_t v = 0; v < g.size(); ++v) {
    os << v << ' ' << to_string(g.kinds[v]) << ' ' << g.level_of[v] << ' '
       << g.labels[v];
    for (NodeId u : g.fanins(static_cast<NodeId>(v))) os << ' ' << u;
    os << '\n';
  }
  return os.str();
}

std::string fault_label(const CircuitGraph& graph, const FaultSpec& fault) {
  return graph.labels[fault.site] + " s-a-" +
         std::to_string(static_cast<int>(fault.stuck_value));
}

std::vector<NodeId> fanout_cone(const CircuitGraph& g, NodeId site) {
  std::vector<std::uint8_t> mark(g.size(), 0);
  std::vector<NodeId> cone{site};
  mark[site] = 1;
  for (std::size_t head = 0; head < cone.size(); ++head) {
    for (NodeId v : g.fanouts(cone[head])) {
      if (!mark[v]) {
        mark[v] = 1;
        cone.push_back(v);
      }
    }
  }
  std::sort(cone.begin(), cone.end(), [&](NodeId a, NodeId b) {
    return g.level_of[a] != g.level_of[b] ? g.level_of[a] < g.level_of[b]
                                          : a < b;
  });
  return cone;
}

namespace {

void check_site(const CircuitGraph& g, const FaultSpec& f) {
  if (f.site < 0 || static_cast<std::size_t>(f.site) >= g.size() ||
      g.kinds[f.site] == NodeKind::kConst0 ||
      g.kinds[f.site] == NodeKind::kConst1 || f.stuck_value > 1) {
    throw Error(ErrorCode::kFaultSiteInvalid,
                "invalid fault site " + std::to_string(f.site));
  }
}

}  // namespace

FaultGraph merge_fault_graphs(const CircuitGraph& graph,
                              std::span<const FaultSpec> faults) {
  for (const auto& f : faults) check_site(graph, f);

  FaultGraph out;
  out.base_size = graph.size();
  CircuitGraph& a = out.arena;
  a = graph;

  std::vector<NodeId> copy_of(graph.size(), -1);
  std::vector<std::int32_t> is_po(graph.size(), 0);
  for (NodeId po : graph.po_nodes) is_po[po] = 1;

  std::size_t fault_index = 0;
  for (const auto& f : faults) {
    FaultView view;
    view.fault = f;
    const auto cone = fanout_cone(graph, f.site);
    const std::string suffix = "@f" + std::to_string(fault_index++);
    for (NodeId orig : cone) {
      const NodeId copy = static_cast<NodeId>(a.kinds.size());
      copy_of[orig] = copy;
      view.dup_map.emplace_back(copy, orig);
      a.origins.push_back(graph.origins[orig]);
      a.labels.push_back(graph.labels[orig] + suffix);
      if (orig == f.site) {
        a.kinds.push_back(f.stuck_value ? NodeKind::kConst1 : NodeKind::kConst0);
      } else {
        a.kinds.push_back(graph.kinds[orig]);
        for (NodeId u : graph.fanins(orig)) {
          a.fanin_src.push_back(copy_of[u] >= 0 ? copy_of[u] : u);
        }
      }
      a.fanin_ptr.push_back(static_cast<std::int32_t>(a.fanin_src.size()));
    }
    view.faulty_po_nodes = graph.po_nodes;
    for (std::size_t j = 0; j < graph.po_nodes.size(); ++j) {
      const NodeId c = copy_of[graph.po_nodes[j]];
      if (c >= 0) {
        view.faulty_po_nodes[j] = c;
        view.observed_pos.push_back(static_cast<std::int32_t>(j));
      }
    }
    for (NodeId orig : cone) copy_of[orig] = -1;
    out.views.push_back(std::move(view));
  }
  relevelize(a);
  return out;
}

FaultGraph build_fault_graph(const CircuitGraph& graph, const FaultSpec& fault) {
  return merge_fault_graphs(graph, std::span<const FaultSpec>(&fault, 1));
}

std::vector<FaultSpec> collapsed_faults(const CircuitGraph& graph) {
  std::vector<FaultSpec> faults;
  for (std::size_t v = 0; v < graph.size(); ++v) {
    const NodeKind k = graph.kinds[v];
    if (k == NodeKind::kConst0 || k == NodeKind::kConst1) continue;
    faults.push_back({static_cast<NodeId>(v), 0});
    faults.push_back({static_cast<NodeId>(v), 1});
  }
  return faults;
}

NodeId find_node(const CircuitGraph& graph, std::string_view label) {
  for (std::size_t v = 0; v < graph.size(); ++v) {
    if (graph.labels[v] == label) return static_cast<NodeId>(v);
  }
  return -1;
}

std::vector<FaultSpec> parse_fault_list(const CircuitGraph& graph,
                                        std::string_view text) {
  std::unordered_map<std::string_view, NodeId> by_label;
  for (std::size_t v = 0; v < graph.size(); ++v) {
    by_label.emplace(graph.labels[v], static_cast<NodeId>(v));
  }
  std::vector<FaultSpec> faults;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      // `#` inside a duplicate-branch label (`a->z#2`) is part of the name.
      const bool in_label = hash > 0 && !std::isspace(static_cast<unsigned char>(line[hash - 1]));
      if (!in_label) line.resize(hash);
    }
    std::istringstream fields(line);
    std::string site, value, extra;
    if (!(fields >> site)) continue;
    const auto where = "fault list line " + std::to_string(line_no);
    if (!(fields >> value) || (fields >> extra)) {
      throw Error(ErrorCode::kFaultList, where + ": expected `site value`");
    }
    if (value != "0" && value != "1") {
      throw Error(ErrorCode::kFaultList,
                  where + ": stuck value must be 0 or 1, got '" + value + "'");
    }
    auto it = by_label.find(site);
    if (it == by_label.end()) {
      throw Error(ErrorCode::kFaultList,
                  where + ": unknown fault site '" + site + "'");
    }
    faults.push_back({it->second, static_cast<std::uint8_t>(value == "1")});
  }
  return faults;
}

std::vector<FaultSpec> read_fault_list_file(const CircuitGraph& graph,
                                            const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kFaultList, "cannot open fault list '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_fault_list(graph, buffer.str());
}

std::string write_fault_list(const CircuitGraph& graph,
                             std::span<const FaultSpec> faults) {
  std::string out;
  for (const auto& f : faults) {
    out += graph.labels[f.site];
    out += ' ';
    out += static_cast<char>('0' + f.stuck_value);
    out += '\n';
  }
  return out;
}

}  // namespace datpg
