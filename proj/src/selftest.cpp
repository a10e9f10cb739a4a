#include "datpg/selftest.hpp"

#include <cmath>

#include <fmt/format.h>

#include "datpg/builtin_circuits.hpp"
#include "datpg/discrete_sim.hpp"
#include "datpg/relaxed_engine.hpp"
#include "datpg/reparam.hpp"

namespace datpg {
namespace {

std::vector<CircuitGraph> suite_circuits(std::uint64_t seed) {
  std::vector<CircuitGraph> out;
  out.push_back(build_graph(parse_bench(c17_bench())));
  out.push_back(build_graph(parse_bench(xnor_bench())));
  for (std::uint64_t k = 0; k < 4; ++k) {
    RandomCircuitOptions opt;
    opt.num_pis = 6;
    opt.num_gates = 30;
    out.push_back(build_graph(random_circuit(opt, seed * 17 + k)));
  }
  return out;
}

SuiteResult corner_suite(std::uint64_t seed) {
  SuiteResult r{"corner", true, ""};
  std::size_t checked = 0;
  for (const CircuitGraph& g : suite_circuits(seed)) {
    const std::size_t n = g.num_pis();
    const std::size_t S = std::size_t{1} << n;
    std::vector<double> x(n * S);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t i = 0; i < n; ++i) x[i * S + s] = (s >> (n - 1 - i)) & 1u;
    }
    RelaxedEngine engine(g);
    ValueTensor values;
    engine.forward(x, S, values, nullptr);
    for (std::size_t s = 0; s < S; ++s) {
      Pattern p(n);
      for (std::size_t i = 0; i < n; ++i) p[i] = x[i * S + s] > 0.5 ? Logic::k1 : Logic::k0;
      const auto po = eval(g, p);
      for (std::size_t j = 0; j < po.size(); ++j) {
        ++checked;
        if (values.row(g.po_nodes[j])[s] != static_cast<double>(po[j])) {
          r.passed = false;
          r.detail = fmt::format("PO {} differs on pattern {}", j, to_string(p));
          return r;
        }
      }
    }
  }
  r.detail = fmt::format("{} output values agree", checked);
  return r;
}

// Evaluates S for one fault at one input point.
struct SurrogateProbe {
  FaultGraph fg;
  RelaxedEngine engine;
  SurrogateProbe(const CircuitGraph& g, const FaultSpec& f, EngineOptions opt)
      : fg(build_fault_graph(g, f)), engine(fg.arena, opt) {}

  SurrogateResult value(std::span<const double> x, ValueTensor& values, BackwardTape* tape) {
    engine.forward(x, 1, values, tape);
    const FaultView& v = fg.views[0];
    return surrogate_S(values, fg.arena.po_nodes, v.faulty_po_nodes, v.observed_pos);
  }
};

SuiteResult gradient_suite(std::uint64_t seed, bool inject_bug) {
  SuiteResult r{"gradient", true, ""};
  const CounterRng rng(seed, 77);
  constexpr double kH = 1e-5;
  constexpr double kTol = 1e-5;
  double worst = 0.0;
  std::size_t checked = 0;
  std::uint64_t draw = 0;
  for (const CircuitGraph& g : suite_circuits(seed)) {
    const auto faults = collapsed_faults(g);
    for (std::size_t trial = 0; trial < 8; ++trial) {
      const FaultSpec f = faults[rng.bits({draw++}) % faults.size()];
      SurrogateProbe probe(g, f, EngineOptions{inject_bug});
      const std::size_t n = g.num_pis();
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = 0.05 + 0.9 * rng.uniform({draw++});
      ValueTensor values;
      BackwardTape tape;
      const SurrogateResult base = probe.value(x, values, &tape);
      if (base.argmax[0] < 0 || base.value[0] < 1e-3) continue;
      // Skip points near a kink of the max or the absolute value.
      const FaultView& v = probe.fg.views[0];
      bool near_kink = false;
      for (std::int32_t j : v.observed_pos) {
        if (j == base.argmax[0]) continue;
        const double d = std::abs(values.row(probe.fg.arena.po_nodes[j])[0] -
                                  values.row(v.faulty_po_nodes[j])[0]);
        if (std::abs(d - base.value[0]) < 1e-3) near_kink = true;
      }
      if (near_kink) continue;
      ValueTensor adjoint;
      adjoint.reset(probe.fg.arena.size(), 1);
      const double w = 1.0;
      backprop_surrogate(values, base, probe.fg.arena.po_nodes, v.faulty_po_nodes,
                         std::span<const double>(&w, 1), adjoint);
      const auto grad = probe.engine.backward(tape, adjoint);
      ValueTensor scratch;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> xp = x, xm = x;
        xp[i] += kH;
        xm[i] -= kH;
        const double fd = (probe.value(xp, scratch, nullptr).value[0] -
                           probe.value(xm, scratch, nullptr).value[0]) / (2 * kH);
        const double err = std::abs(fd - grad[i]) /
                           std::max({std::abs(fd), std::abs(grad[i]), 1e-4});
        worst = std::max(worst, err);
        ++checked;
        if (err > kTol) {
          r.passed = false;
          r.detail = fmt::format("{}: d/dx{} analytic {:.9g} vs fd {:.9g}",
                                 fault_label(g, f), i, grad[i], fd);
          return r;
        }
      }
    }
  }
  r.detail = fmt::format("{} partials, max rel err {:.3g}", checked, worst);
  return r;
}

SuiteResult reparam_suite(std::uint64_t seed) {
  SuiteResult r{"reparam", true, ""};
  constexpr std::size_t kDraws = 100000;
  std::string detail;
  for (int t = -2; t <= 2; ++t) {
    const LogitTensor theta{1, 1, 1, {static_cast<double>(t)}};
    const NoiseSample noise = draw_noise(CounterRng(seed, 99), static_cast<std::uint64_t>(t + 2), 1, 1, kDraws);
    const auto hard = sample_hard(theta, noise);
    double hits = 0;
    for (auto h : hard) hits += h;
    const double p = sigmoid(t);
    const double freq = hits / kDraws;
    const double sd = std::sqrt(p * (1 - p) / kDraws);
    detail += fmt::format("{}theta={} freq={:.4f} p={:.4f}", detail.empty() ? "" : ", ", t, freq, p);
    if (std::abs(freq - p) > 3 * sd) r.passed = false;
  }
  r.detail = detail;
  return r;
}

}  // namespace

std::vector<SuiteResult> run_selftest(const SelftestOptions& options) {
  std::vector<SuiteResult> out;
  out.push_back(corner_suite(options.seed));
  out.push_back(gradient_suite(options.seed, options.inject_bug));
  SuiteResult reparam{"reparam", true, ""};
  for (std::size_t k = 0; k < std::max<std::size_t>(1, options.seeds); ++k) {
    SuiteResult one = reparam_suite(options.seed + k);
    if (!one.passed && reparam.passed) {
      reparam.passed = false;
      reparam.detail = fmt::format("seed {}: {}", options.seed + k, one.detail);
    }
    if (reparam.passed) reparam.detail = fmt::format("{} seed(s); last: {}", k + 1, one.detail);
  }
  out.push_back(std::move(reparam));
  return out;
}

}  // namespace datpg
