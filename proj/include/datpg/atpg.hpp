#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "datpg/circuit_graph.hpp"
#include "datpg/discrete_sim.hpp"
#include "datpg/relaxed_engine.hpp"
#include "datpg/reparam.hpp"

namespace datpg {

enum class OptimizerMode {
  // Logistic-noise reparameterization, gated exploit plus annealed explore.
  kReparameterized,
  // Ablation: deterministic x = sigmoid(theta_hat), ungated surrogate only,
  // patterns read off by thresholding sigmoid(theta_hat) at 0.5.
  kNaiveRelaxation,
};

struct AtpgConfig {
  std::size_t patterns_per_run = 4;  // T
  std::size_t batches = 2;           // B
  std::size_t noise_samples = 8;     // K
  std::size_t pattern_budget = 64;
  double lambda_x = 0.0;
  Schedules schedules;  // max_iters, tau, w_explore and lr schedules
  std::uint64_t seed = 0;
  double x_lo = 1e-4;
  double x_hi = 1.0 - 1e-4;
  double init_jitter = 0.01;
  bool normalize_gradients = true;
  OptimizerMode mode = OptimizerMode::kReparameterized;
  // Convergence checks: every check_every iterations the banded and rounded
  // logits plus the detecting samples seen so far are fault-simulated. A
  // round ends once banded patterns alone detect every target, or after
  // `patience` checks without improvement when either every target is
  // detected or w_explore has reached 0.
  std::size_t check_every = 10;
  std::size_t patience = 10;
  // Upper bound on faults merged per round; 0 merges every remaining fault.
  // Faults already missed once are retried in groups of at most T * B.
  std::size_t faults_per_round = 64;

  // Throws Error(kConfig) on an invalid field.
  void validate() const;
};

struct ObjectiveParams {
  double tau = 1.0;
  double w_explore = 0.0;
  double lambda = 0.0;
  OptimizerMode mode = OptimizerMode::kReparameterized;
};

struct MultiFaultObjective {
  ObjectiveBreakdown breakdown;
  std::vector<double> grad;  // d combined / d theta_hat, [num_pis x slots]
  std::vector<std::int32_t> best_pattern;  // [fault x batch] argmax t
  // Distinct hard samples that detect at least one fault, in sample order,
  // and the slot each was drawn for. Empty in naive mode.
  std::vector<Pattern> detecting_samples;
  std::vector<std::int32_t> detecting_slots;
};

// Joint objective sum_f mean_b max_t L_final(f, t, b) over a merged
// fault-included graph. Owns the merged arena, its engine and scratch.
class MultiFaultProblem {
 public:
  MultiFaultProblem(const CircuitGraph& graph, std::span<const FaultSpec> faults,
                    EngineOptions engine_options = {});
  MultiFaultProblem(const MultiFaultProblem&) = delete;
  MultiFaultProblem& operator=(const MultiFaultProblem&) = delete;

  const FaultGraph& merged() const { return *merged_; }
  const RelaxedEngine& engine() const { return engine_; }

  // In naive mode the noise is ignored and x = sigmoid(theta_hat).
  MultiFaultObjective evaluate(const LogitTensor& theta, const NoiseSample& noise,
                               const ObjectiveParams& params);

 private:
  const CircuitGraph* graph_;
  std::unique_ptr<FaultGraph> merged_;
  RelaxedEngine engine_;
  ValueTensor values_;
  ValueTensor adjoint_;
  BackwardTape tape_;
  std::vector<std::uint64_t> pi_words_;
  std::vector<std::uint64_t> node_words_;
};

// Band extraction: 0 if sigmoid(theta) <= lo, 1 if >= hi, X otherwise. One
// pattern per (t, b) slot in slot order, duplicates removed.
std::vector<Pattern> extract_patterns(const LogitTensor& theta, double lo,
                                      double hi);

struct TraceRow {
  std::size_t round = 0;
  std::size_t iter = 0;
  double w_explore = 0.0;
  double tau = 0.0;
  ObjectiveBreakdown objective;
  double grad_norm = 0.0;  // global l2 norm before normalization
};

struct AtpgResult {
  std::vector<Pattern> patterns;
  DetectionReport report;  // against the input fault list
  std::vector<TraceRow> trace;
  std::vector<FaultSpec> undetected;
  std::size_t iterations_used = 0;
  std::size_t rounds = 0;
};

AtpgResult run_atpg(const CircuitGraph& graph, std::span<const FaultSpec> faults,
                    const AtpgConfig& config);
AtpgResult run_atpg(const Netlist& netlist, std::span<const FaultSpec> faults,
                    const AtpgConfig& config);

// Outcome of a single optimization round, exposed for ablations and tests.
struct RoundOutcome {
  LogitTensor theta;                 // logits at the best check
  LogitTensor last_theta;            // logits when the round stopped
  std::vector<Pattern> candidates;   // extracted at the best check
  // Slot whose logits produced each candidate; -1 for band-extracted ones.
  std::vector<std::int32_t> candidate_slots;
  std::size_t best_detected = 0;     // targets detected by the candidates
  std::size_t iterations = 0;
  // First iteration (1-based) whose check detected at least one target;
  // 0 when none did.
  std::size_t first_detection_iter = 0;
};

RoundOutcome optimize_round(const CircuitGraph& graph,
                            std::span<const FaultSpec> targets,
                            const AtpgConfig& config, std::uint64_t round_seed,
                            std::size_t round_index,
                            std::vector<TraceRow>* trace);

// Turns specified bits of `pattern` back into X, starting with the logit
// closest to 0, wherever slot q's logit lies inside the (lo, hi) band and
// every fault in `keep` stays detected.
Pattern restore_x_bits(const CircuitGraph& graph, Pattern pattern,
                       const LogitTensor& theta, std::size_t q, double lo,
                       double hi, std::span<const FaultSpec> keep);

// (pattern index, cumulative detected faults) per emitted pattern.
std::vector<std::pair<std::size_t, std::size_t>> coverage_curve(
    const AtpgResult& result);

std::string trace_csv(std::span<const TraceRow> trace);
std::string coverage_csv(
    std::span<const std::pair<std::size_t, std::size_t>> curve);

}  // namespace datpg
