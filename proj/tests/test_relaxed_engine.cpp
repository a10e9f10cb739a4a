#include <doctest.h>

#include <cmath>
#include <random>

#ifdef DATPG_HAVE_OPENMP
#include <omp.h>
#endif

#include "datpg/builtin_circuits.hpp"
#include "datpg/discrete_sim.hpp"
#include "datpg/relaxed_engine.hpp"
#include "support/oracles.hpp"

using namespace datpg;

namespace {

double fn(NodeKind k, std::vector<double> in) { return gate_fn(k, in); }

const NodeKind kLogicKinds[] = {NodeKind::kAnd, NodeKind::kNand, NodeKind::kOr, NodeKind::kNor,
                                NodeKind::kXor, NodeKind::kXnor};

}  // namespace

TEST_SUITE("relaxed_engine") {

TEST_CASE("two-input relaxations") {
  CHECK(fn(NodeKind::kAnd, {0.3, 0.6}) == doctest::Approx(0.18));
  CHECK(fn(NodeKind::kNand, {0.3, 0.6}) == doctest::Approx(0.82));
  CHECK(fn(NodeKind::kOr, {0.3, 0.6}) == doctest::Approx(0.72));
  CHECK(fn(NodeKind::kNor, {0.3, 0.6}) == doctest::Approx(0.28));
  CHECK(fn(NodeKind::kXor, {0.3, 0.6}) == doctest::Approx(0.54));
  CHECK(fn(NodeKind::kXnor, {0.3, 0.6}) == doctest::Approx(0.46));
  CHECK(fn(NodeKind::kXnor, {1, 1}) == 1.0);
  CHECK(fn(NodeKind::kXnor, {0, 1}) == 0.0);
  CHECK(fn(NodeKind::kXnor, {0.5, 0.5}) == 0.5);
  CHECK(fn(NodeKind::kNot, {0.25}) == 0.75);
  CHECK(fn(NodeKind::kBuf, {0.25}) == 0.25);
  CHECK(fn(NodeKind::kBranch, {0.25}) == 0.25);
}

TEST_CASE("n-ary gates match closed forms and corners") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const GateType types[] = {GateType::kAnd, GateType::kNand, GateType::kOr,
                            GateType::kNor, GateType::kXor, GateType::kXnor};
  for (std::size_t arity = 2; arity <= 5; ++arity) {
    for (GateType t : types) {
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> in(arity);
        for (auto& v : in) v = u(gen);
        CHECK(gate_fn(node_kind_of(t), in) == doctest::Approx(oracle::relaxed_gate(t, in)).epsilon(1e-12));
      }
      for (std::uint64_t w = 0; w < (1u << arity); ++w) {
        const auto bits = oracle::bits_of(w, arity);
        std::vector<double> in(bits.begin(), bits.end());
        CHECK(gate_fn(node_kind_of(t), in) == static_cast<double>(oracle::boolean_gate(t, bits)));
      }
    }
  }
}

TEST_CASE("partials match central differences and stay within [-1, 1]") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (NodeKind k : kLogicKinds) {
    for (std::size_t arity = 2; arity <= 4; ++arity) {
      for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> in(arity);
        for (auto& v : in) v = u(gen);
        for (std::size_t pin = 0; pin < arity; ++pin) {
          const double h = 1e-6;
          auto hi = in, lo = in;
          hi[pin] += h;
          lo[pin] -= h;
          const double fd = (gate_fn(k, hi) - gate_fn(k, lo)) / (2 * h);
          const double p = gate_partial(k, in, pin);
          CHECK(p == doctest::Approx(fd).epsilon(1e-7));
          CHECK(std::abs(p) <= 1.0);
        }
      }
    }
  }
  const double one[] = {0.4};
  CHECK(gate_partial(NodeKind::kNot, one, 0) == -1.0);
  CHECK(gate_partial(NodeKind::kBuf, one, 0) == 1.0);
}

TEST_CASE("forward matches the recursive relaxed oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RandomCircuitOptions opt;
    opt.num_pis = 7;
    opt.num_gates = 50;
    const Netlist nl = random_circuit(opt, seed);
    const CircuitGraph g = build_graph(nl);
    RelaxedEngine engine(g);
    const std::size_t S = 37;
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(g.num_pis() * S);
    for (auto& v : x) v = u(gen);
    ValueTensor values;
    engine.forward(x, S, values, nullptr);
    auto ev = oracle::relaxed_evaluator(nl);
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<double> pis(g.num_pis());
      for (std::size_t i = 0; i < pis.size(); ++i) pis[i] = x[i * S + s];
      const auto want = ev.outputs(pis, std::nullopt);
      for (std::size_t j = 0; j < want.size(); ++j) {
        CHECK(values.row(g.po_nodes[j])[s] == doctest::Approx(want[j]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("corner consistency on c17") {
  const CircuitGraph g = build_graph(parse_bench(c17_bench()));
  RelaxedEngine engine(g);
  const std::size_t S = 32;
  std::vector<double> x(5 * S);
  for (std::size_t s = 0; s < S; ++s) {
    const auto bits = oracle::bits_of(s, 5);
    for (std::size_t i = 0; i < 5; ++i) x[i * S + s] = bits[i];
  }
  ValueTensor values;
  engine.forward(x, S, values, nullptr);
  for (std::size_t s = 0; s < S; ++s) {
    Pattern p;
    for (int b : oracle::bits_of(s, 5)) p.push_back(b ? Logic::k1 : Logic::k0);
    const auto po = eval(g, p);
    for (std::size_t j = 0; j < po.size(); ++j) CHECK(values.row(g.po_nodes[j])[s] == po[j]);
  }
}

TEST_CASE("surrogate gradient matches finite differences of the oracle") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    RandomCircuitOptions opt;
    opt.num_pis = 5;
    opt.num_gates = 25;
    const Netlist nl = random_circuit(opt, 40 + seed);
    const CircuitGraph g = build_graph(nl);
    const auto faults = collapsed_faults(g);
    const FaultSpec f = faults[gen() % faults.size()];
    const auto of = oracle::fault_from_label(nl, g.labels[f.site], f.stuck_value);
    const FaultGraph fg = build_fault_graph(g, f);
    RelaxedEngine engine(fg.arena);
    std::vector<double> x(g.num_pis());
    for (auto& v : x) v = u(gen);
    ValueTensor values;
    BackwardTape tape;
    engine.forward(x, 1, values, &tape);
    const auto& view = fg.views[0];
    const SurrogateResult sr = surrogate_S(values, fg.arena.po_nodes, view.faulty_po_nodes, view.observed_pos);
    CHECK(sr.value[0] == doctest::Approx(oracle::surrogate(nl, of, x)).epsilon(1e-12));
    if (sr.argmax[0] < 0 || sr.value[0] < 1e-3) continue;
    ValueTensor adjoint;
    adjoint.reset(fg.arena.size(), 1);
    const double w = 1.0;
    backprop_surrogate(values, sr, fg.arena.po_nodes, view.faulty_po_nodes, {&w, 1}, adjoint);
    const auto grad = engine.backward(tape, adjoint);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double h = 1e-6;
      auto hi = x, lo = x;
      hi[i] += h;
      lo[i] -= h;
      const double fd = (oracle::surrogate(nl, of, hi) - oracle::surrogate(nl, of, lo)) / (2 * h);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("surrogate ties and zero difference") {
  const double free_pos[] = {0.25, 0.25, 1.0, 0.75};  // [2 POs x 2 samples]
  const double faulty[] = {0.75, 0.25, 0.5, 0.75};
  const SurrogateResult r = surrogate_S(free_pos, faulty, 2, 2);
  CHECK(r.value[0] == doctest::Approx(0.5));
  CHECK(r.argmax[0] == 0);  // tie resolved to the lowest output index
  CHECK(r.value[1] == 0.0);
  CHECK(r.argmax[1] == -1);
}

TEST_CASE("results do not depend on the thread count") {
  RandomCircuitOptions opt;
  opt.num_pis = 10;
  opt.num_gates = 300;
  const CircuitGraph g = build_graph(random_circuit(opt, 77));
  RelaxedEngine engine(g);
  const std::size_t S = 203;
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(g.num_pis() * S);
  for (auto& v : x) v = u(gen);
  auto run = [&] {
    ValueTensor values, adjoint;
    BackwardTape tape;
    engine.forward(x, S, values, &tape);
    adjoint.reset(g.size(), S);
    for (NodeId po : g.po_nodes) {
      for (auto& a : adjoint.row(po)) a = 1.0;
    }
    auto grad = engine.backward(tape, adjoint);
    grad.insert(grad.end(), values.data.begin(), values.data.end());
    return grad;
  };
#ifdef DATPG_HAVE_OPENMP
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = run();
  omp_set_num_threads(4);
  const auto four = run();
  omp_set_num_threads(saved);
  CHECK(one == four);
#else
  CHECK(run() == run());
#endif
}

TEST_CASE("mismatched tape or adjoint is rejected") {
  const CircuitGraph g = build_graph(parse_bench(c17_bench()));
  const CircuitGraph x = build_graph(parse_bench(xnor_bench()));
  RelaxedEngine eg(g), ex(x);
  std::vector<double> in(5 * 4, 0.5);
  ValueTensor values, adjoint;
  BackwardTape tape;
  eg.forward(in, 4, values, &tape);
  adjoint.reset(x.size(), 4);
  try {
    ex.backward(tape, adjoint);
    FAIL("expected TapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTapeMismatch);
  }
  adjoint.reset(g.size(), 3);
  CHECK_THROWS_AS(eg.backward(tape, adjoint), Error);
}

TEST_CASE("level statistics") {
  const CircuitGraph g = build_graph(parse_bench(c17_bench()));
  RelaxedEngine engine(g);
  std::vector<double> in(5 * 2, 0.5);
  ValueTensor values;
  engine.forward(in, 2, values, nullptr);
  const std::string stats = engine.level_stats(values);
  CHECK(std::count(stats.begin(), stats.end(), '\n') >= static_cast<long>(g.num_levels()));
}

}  // TEST_SUITE
