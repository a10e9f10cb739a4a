#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "datpg/circuit_graph.hpp"

namespace datpg {

// Probabilistic relaxation of one gate. n-ary gates fold the 2-input base
// function (AND / OR / XOR) over their fan-ins in order; inverting kinds
// complement the folded value.
double gate_fn(NodeKind kind, std::span<const double> fanins);

// d gate_fn / d fanins[pin].
double gate_partial(NodeKind kind, std::span<const double> fanins,
                    std::size_t pin);

// Dense [rows x samples] real tensor, samples contiguous per row.
struct ValueTensor {
  std::size_t rows = 0;
  std::size_t samples = 0;
  std::vector<double> data;

  void reset(std::size_t r, std::size_t s) {
    rows = r;
    samples = s;
    data.assign(r * s, 0.0);
  }
  std::span<double> row(std::size_t r) {
    return {data.data() + r * samples, samples};
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * samples, samples};
  }
};

// Saved per-edge fan-in values, one contiguous buffer laid out level by
// level in fanin_src order within each level. Holds no node values.
struct BackwardTape {
  const CircuitGraph* graph = nullptr;
  std::size_t samples = 0;
  std::vector<double> fanin_values;  // [edge position x samples]
};

struct EngineOptions {
  // Test hook: scales every AND-family partial by 1.01.
  bool corrupt_and_partial = false;
};

// Levelized forward/backward propagation over a CSR graph, batched over a
// flattened sample axis. Each worker owns a contiguous slice of samples and
// walks every level, so results are independent of the thread count.
class RelaxedEngine {
 public:
  explicit RelaxedEngine(const CircuitGraph& graph, EngineOptions options = {});

  const CircuitGraph& graph() const { return *graph_; }

  // pi_values is [num_pis x samples]. Fills `values` ([size() x samples]) and,
  // when given, `tape`.
  void forward(std::span<const double> pi_values, std::size_t samples,
               ValueTensor& values, BackwardTape* tape) const;

  // `adjoint` carries the seeds (d objective / d node) on entry and is
  // overwritten with full node adjoints. Returns [num_pis x samples].
  std::vector<double> backward(const BackwardTape& tape,
                               ValueTensor& adjoint) const;

  // Per-level min / mean / max of node values, one line per level.
  std::string level_stats(const ValueTensor& values) const;

 private:
  void forward_slice(std::span<const double> pi_values, std::size_t samples,
                     std::size_t begin, std::size_t end, ValueTensor& values,
                     BackwardTape* tape) const;
  void backward_slice(const BackwardTape& tape, std::size_t begin,
                      std::size_t end, ValueTensor& adjoint) const;

  const CircuitGraph* graph_;
  EngineOptions options_;
  std::vector<std::int32_t> tape_pos_;  // first tape edge of each node
  std::size_t tape_edges_ = 0;
};

struct SurrogateResult {
  std::vector<double> value;         // [samples]
  std::vector<std::int32_t> argmax;  // output index per sample, -1 if none
};

// Per-sample max over the listed outputs of |fault-free - faulty|, ties
// resolved to the lowest output index.
SurrogateResult surrogate_S(const ValueTensor& values,
                            std::span<const NodeId> free_pos,
                            std::span<const NodeId> faulty_pos,
                            std::span<const std::int32_t> observed);

// Dense-row variant: po_free / po_faulty are [num_pos x samples].
SurrogateResult surrogate_S(std::span<const double> po_free,
                            std::span<const double> po_faulty,
                            std::size_t num_pos, std::size_t samples);

// Adds d objective / d node for `weight[s] * S[s]` into `adjoint`, routed to
// the argmax output only.
void backprop_surrogate(const ValueTensor& values, const SurrogateResult& s,
                        std::span<const NodeId> free_pos,
                        std::span<const NodeId> faulty_pos,
                        std::span<const double> weight, ValueTensor& adjoint);

}  // namespace datpg
