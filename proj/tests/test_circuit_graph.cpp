#include <doctest.h>

#include <algorithm>
#include <functional>
#include <queue>
#include <set>

#include "datpg/builtin_circuits.hpp"
#include "datpg/circuit_graph.hpp"
#include "support/oracles.hpp"

using namespace datpg;

namespace {

// Nodes reachable from `site` following fan-out edges (breadth first).
std::set<NodeId> reachable(const CircuitGraph& g, NodeId site) {
  std::set<NodeId> seen{site};
  std::queue<NodeId> q;
  q.push(site);
  while (!q.empty()) {
    const NodeId v = q.front();
    q.pop();
    for (NodeId w : g.fanouts(v)) {
      if (seen.insert(w).second) q.push(w);
    }
  }
  return seen;
}

// Longest edge path ending at each node, by memoized recursion over fan-ins.
std::vector<int> longest_paths(const CircuitGraph& g) {
  std::vector<int> memo(g.size(), -1);
  std::function<int(NodeId)> rec = [&](NodeId v) {
    if (memo[v] >= 0) return memo[v];
    int best = 0;
    for (NodeId u : g.fanins(v)) best = std::max(best, rec(u) + 1);
    return memo[v] = best;
  };
  for (NodeId v = 0; v < static_cast<NodeId>(g.size()); ++v) rec(v);
  return memo;
}

std::size_t count_kind(const CircuitGraph& g, NodeKind k) {
  return std::count(g.kinds.begin(), g.kinds.end(), k);
}

}  // namespace

TEST_SUITE("circuit_graph") {

TEST_CASE("xnor graph") {
  const CircuitGraph g = build_graph(parse_bench(xnor_bench()));
  CHECK(g.size() == 3);
  CHECK(g.num_pis() == 2);
  CHECK(count_kind(g, NodeKind::kXnor) == 1);
  CHECK(count_kind(g, NodeKind::kBranch) == 0);
  CHECK(g.num_levels() == 2);
}

TEST_CASE("fan-out of three creates three branches") {
  const CircuitGraph g = build_graph(parse_bench(
      "INPUT(a)\nINPUT(b)\nOUTPUT(x)\nOUTPUT(y)\nOUTPUT(w)\n"
      "n = AND(a, b)\nx = NOT(n)\ny = BUF(n)\nw = OR(n, a)\n"));
  const NodeId n = find_node(g, "n");
  REQUIRE(n >= 0);
  CHECK(g.fanouts(n).size() == 3);
  for (NodeId br : g.fanouts(n)) {
    CHECK(g.kinds[br] == NodeKind::kBranch);
    REQUIRE(g.fanins(br).size() == 1);
    CHECK(g.fanins(br)[0] == n);
  }
  CHECK(find_node(g, "n->x") >= 0);
  CHECK(find_node(g, "n->w") >= 0);
}

TEST_CASE("levels are longest paths") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RandomCircuitOptions opt;
    opt.num_pis = 5;
    opt.num_gates = 40;
    const CircuitGraph g = build_graph(random_circuit(opt, seed));
    const auto lp = longest_paths(g);
    for (NodeId v = 0; v < static_cast<NodeId>(g.size()); ++v) CHECK(g.level_of[v] == lp[v]);
    CHECK(g.num_levels() == static_cast<std::size_t>(*std::max_element(lp.begin(), lp.end()) + 1));
    for (NodeId v = 0; v < static_cast<NodeId>(g.size()); ++v) {
      CHECK(g.fanin_ptr[v + 1] - g.fanin_ptr[v] == static_cast<int>(g.fanins(v).size()));
    }
  }
}

TEST_CASE("c17 gate depth matches the netlist") {
  const Netlist nl = parse_bench(c17_bench());
  const CircuitGraph g = build_graph(nl);
  // Gate count along the deepest path, branch nodes excluded.
  std::vector<int> depth(g.size(), 0);
  for (const auto& level : g.levels) {
    for (NodeId v : level) {
      for (NodeId u : g.fanins(v)) depth[v] = std::max(depth[v], depth[u]);
      if (g.kinds[v] != NodeKind::kBranch && g.kinds[v] != NodeKind::kInput) ++depth[v];
    }
  }
  CHECK(static_cast<std::size_t>(*std::max_element(depth.begin(), depth.end())) ==
        oracle::logic_depth(nl));
  CHECK(oracle::logic_depth(nl) == 3);
  CHECK(g.num_levels() == 7);
}

TEST_CASE("xnor output stuck-at-1 duplicates only the output") {
  const CircuitGraph g = build_graph(parse_bench(xnor_bench()));
  const FaultGraph fg = build_fault_graph(g, {find_node(g, "z"), 1});
  REQUIRE(fg.views.size() == 1);
  CHECK(fg.views[0].dup_map.size() == 1);
  CHECK(fg.arena.size() == g.size() + 1);
  CHECK(fg.arena.kinds[fg.views[0].faulty_po_nodes[0]] == NodeKind::kConst1);
  CHECK(fg.views[0].observed_pos == std::vector<std::int32_t>{0});
}

TEST_CASE("cone size matches reachability") {
  const CircuitGraph g = build_graph(parse_bench(c17_bench()));
  for (NodeId v = 0; v < static_cast<NodeId>(g.size()); ++v) {
    const auto reach = reachable(g, v);
    const auto cone = fanout_cone(g, v);
    CHECK(cone.size() == reach.size());
    const FaultGraph fg = build_fault_graph(g, {v, 0});
    CHECK(fg.views[0].dup_map.size() == reach.size());
    CHECK(fg.arena.size() == g.size() + reach.size());
  }
}

TEST_CASE("branch fault cone excludes siblings") {
  const CircuitGraph g = build_graph(parse_bench(c17_bench()));
  const NodeId br = find_node(g, "3->10");
  const NodeId sibling = find_node(g, "3->11");
  REQUIRE(br >= 0);
  REQUIRE(sibling >= 0);
  const auto cone = fanout_cone(g, br);
  CHECK(std::find(cone.begin(), cone.end(), sibling) == cone.end());
  CHECK(std::find(cone.begin(), cone.end(), find_node(g, "11")) == cone.end());
  CHECK(std::find(cone.begin(), cone.end(), find_node(g, "10")) != cone.end());
}

TEST_CASE("merged cones are independent copies") {
  RandomCircuitOptions opt;
  opt.num_pis = 4;
  opt.num_gates = 10;
  const CircuitGraph g = build_graph(random_circuit(opt, 3));
  const auto faults = collapsed_faults(g);
  for (std::size_t a = 0; a < faults.size(); a += 3) {
    for (std::size_t b = a + 1; b < faults.size(); b += 5) {
      const FaultSpec pair[2] = {faults[a], faults[b]};
      const FaultGraph fg = merge_fault_graphs(g, pair);
      const std::size_t ca = reachable(g, faults[a].site).size();
      const std::size_t cb = reachable(g, faults[b].site).size();
      CHECK(fg.arena.size() == g.size() + ca + cb);
      std::set<NodeId> copies;
      for (const auto& v : fg.views) {
        for (auto [copy, orig] : v.dup_map) CHECK(copies.insert(copy).second);
      }
    }
  }
  const FaultSpec one[1] = {faults[0]};
  const FaultGraph m = merge_fault_graphs(g, one);
  const FaultGraph s = build_fault_graph(g, faults[0]);
  CHECK(m.arena.kinds == s.arena.kinds);
  CHECK(m.arena.fanin_src == s.arena.fanin_src);
}

TEST_CASE("collapsed faults cover every site in both polarities") {
  const CircuitGraph g = build_graph(parse_bench(c17_bench()));
  const auto faults = collapsed_faults(g);
  CHECK(faults.size() == 2 * g.size());
  CHECK(faults.size() == 34);
}

TEST_CASE("fault list parsing") {
  const CircuitGraph g = build_graph(parse_bench(c17_bench()));
  const auto f = parse_fault_list(g, "# c17 picks\n22 1\n3->10 0  # branch\n\n");
  REQUIRE(f.size() == 2);
  CHECK(f[0] == FaultSpec{find_node(g, "22"), 1});
  CHECK(f[1] == FaultSpec{find_node(g, "3->10"), 0});
  CHECK(parse_fault_list(g, write_fault_list(g, f)) == f);
  CHECK_THROWS_AS(parse_fault_list(g, "nosuch 1\n"), Error);
  CHECK_THROWS_AS(parse_fault_list(g, "22 2\n"), Error);
}

}  // TEST_SUITE
