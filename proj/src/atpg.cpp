#include "datpg/atpg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

namespace datpg {

void AtpgConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfig, what); };
  if (patterns_per_run < 1) fail("T (patterns per run) must be >= 1");
  if (batches < 1) fail("B (batches) must be >= 1");
  if (noise_samples < 1) fail("K (noise samples) must be >= 1");
  if (schedules.max_iters < 1) fail("max_iters must be >= 1");
  if (pattern_budget < 1) fail("pattern budget must be >= 1");
  if (!(lambda_x >= 0.0)) fail("lambda must be >= 0");
  if (!(x_lo >= 0.0 && x_lo < x_hi && x_hi <= 1.0)) fail("x band must satisfy 0 <= lo < hi <= 1");
  if (!(schedules.tau_start > 0.0 && schedules.tau_end > 0.0)) fail("temperatures must be > 0");
  if (!(schedules.lr > 0.0)) fail("learning rate must be > 0");
  if (!(schedules.explore_fraction >= 0.0 && schedules.explore_fraction <= 1.0)) {
    fail("explore fraction must lie in [0, 1]");
  }
  if (!(init_jitter >= 0.0)) fail("init jitter must be >= 0");
  if (check_every < 1) fail("check_every must be >= 1");
}

MultiFaultProblem::MultiFaultProblem(const CircuitGraph& graph,
                                     std::span<const FaultSpec> faults,
                                     EngineOptions engine_options)
    : graph_(&graph),
      merged_(std::make_unique<FaultGraph>(merge_fault_graphs(graph, faults))),
      engine_(merged_->arena, engine_options) {}

MultiFaultObjective MultiFaultProblem::evaluate(const LogitTensor& theta,
                                                const NoiseSample& noise,
                                                const ObjectiveParams& params) {
  const CircuitGraph& arena = merged_->arena;
  const std::size_t n = graph_->num_pis();
  const std::size_t Q = theta.slots();
  const std::size_t B = theta.batches;
  const std::size_t T = theta.patterns;
  const bool naive = params.mode == OptimizerMode::kNaiveRelaxation;
  if (theta.num_pis != n || theta.data.size() != n * Q) {
    throw Error(ErrorCode::kShapeMismatch, "logits do not match the circuit inputs");
  }
  const std::size_t K = naive ? 1 : noise.samples_per_slot;
  const std::size_t S = Q * K;
  const double tau = naive ? 1.0 : params.tau;
  const double w = naive ? 1.0 : params.w_explore;

  std::vector<double> x;
  if (naive) {
    x.resize(n * Q);
    for (std::size_t e = 0; e < x.size(); ++e) x[e] = sigmoid(theta.data[e]);
  } else {
    x = sample_soft(theta, noise, tau);
  }
  engine_.forward(x, S, values_, &tape_);

  const std::size_t W = (S + 63) / 64;
  if (!naive) {
    const auto hard = sample_hard(theta, noise);
    pi_words_.assign(n * W, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < S; ++s) {
        if (hard[i * S + s]) pi_words_[i * W + s / 64] |= std::uint64_t{1} << (s % 64);
      }
    }
    simulate_words(arena, pi_words_, W, node_words_);
  }

  adjoint_.rows = arena.size();
  adjoint_.samples = S;
  adjoint_.data.assign(arena.size() * S, 0.0);

  MultiFaultObjective out;
  const std::size_t F = merged_->views.size();
  out.best_pattern.assign(F * B, 0);
  std::vector<double> weight(S);
  std::vector<std::uint8_t> indicator(S, 0);
  std::vector<std::uint64_t> diff(W);
  std::vector<std::uint64_t> any_detect(W, 0);
  double exploit_sum = 0.0, explore_sum = 0.0;
  std::size_t hits = 0;
  const double inv_k = 1.0 / static_cast<double>(K);
  const double inv_b = 1.0 / static_cast<double>(B);

  for (std::size_t f = 0; f < F; ++f) {
    const FaultView& view = merged_->views[f];
    const SurrogateResult sr =
        surrogate_S(values_, arena.po_nodes, view.faulty_po_nodes, view.observed_pos);
    if (!naive) {
      std::fill(diff.begin(), diff.end(), 0);
      for (std::int32_t j : view.observed_pos) {
        const std::uint64_t* a = node_words_.data() + static_cast<std::size_t>(arena.po_nodes[j]) * W;
        const std::uint64_t* b = node_words_.data() + static_cast<std::size_t>(view.faulty_po_nodes[j]) * W;
        for (std::size_t wd = 0; wd < W; ++wd) diff[wd] |= a[wd] ^ b[wd];
      }
      for (std::size_t s = 0; s < S; ++s) {
        indicator[s] = (diff[s / 64] >> (s % 64)) & 1u;
        hits += indicator[s];
      }
      for (std::size_t wd = 0; wd < W; ++wd) any_detect[wd] |= diff[wd];
    }
    std::fill(weight.begin(), weight.end(), 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      std::size_t best_t = 0;
      double best_value = -std::numeric_limits<double>::infinity();
      double best_exploit = 0.0, best_explore = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t q = t * B + b;
        const std::span<const double> s_slot(sr.value.data() + q * K, K);
        const double explore = explore_objective(s_slot).value;
        const double exploit =
            naive ? 0.0
                  : exploit_objective(s_slot, std::span<const std::uint8_t>(indicator.data() + q * K, K)).value;
        const double value = (1.0 - w) * exploit + w * explore;
        if (value > best_value) {
          best_value = value;
          best_t = t;
          best_exploit = exploit;
          best_explore = explore;
        }
      }
      exploit_sum += best_exploit * inv_b;
      explore_sum += best_explore * inv_b;
      out.best_pattern[f * B + b] = static_cast<std::int32_t>(best_t);
      const std::size_t q = best_t * B + b;
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t s = q * K + k;
        const double gate = naive ? 1.0 : (1.0 - w) * indicator[s] + w;
        weight[s] = gate * inv_k * inv_b;
      }
    }
    backprop_surrogate(values_, sr, arena.po_nodes, view.faulty_po_nodes, weight, adjoint_);
  }

  if (!naive) {
    std::set<std::string> seen;
    for (std::size_t s = 0; s < S; ++s) {
      if (!((any_detect[s / 64] >> (s % 64)) & 1u)) continue;
      Pattern p(n);
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = (pi_words_[i * W + s / 64] >> (s % 64)) & 1u ? Logic::k1 : Logic::k0;
      }
      if (seen.insert(to_string(p)).second) {
        out.detecting_samples.push_back(std::move(p));
        out.detecting_slots.push_back(static_cast<std::int32_t>(s / K));
      }
    }
  }

  const std::vector<double> gx = engine_.backward(tape_, adjoint_);
  const PenaltyResult penalty = x_penalty(x, n, T, B, K, params.lambda);

  out.grad.assign(n * Q, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < Q; ++q) {
      double g = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t e = (i * Q + q) * K + k;
        g += (gx[e] - penalty.grad[e]) * x[e] * (1.0 - x[e]) / tau;
      }
      out.grad[i * Q + q] = g;
    }
  }
  out.breakdown = combine(exploit_sum, explore_sum, penalty.value, w);
  out.breakdown.detect_rate =
      naive || F == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(F * S);
  return out;
}

std::vector<Pattern> extract_patterns(const LogitTensor& theta, double lo, double hi) {
  std::vector<Pattern> out;
  std::set<std::string> seen;
  for (std::size_t q = 0; q < theta.slots(); ++q) {
    Pattern p(theta.num_pis);
    for (std::size_t i = 0; i < theta.num_pis; ++i) {
      const double prob = sigmoid(theta.data[i * theta.slots() + q]);
      p[i] = prob <= lo ? Logic::k0 : prob >= hi ? Logic::k1 : Logic::kX;
    }
    if (seen.insert(to_string(p)).second) out.push_back(std::move(p));
  }
  return out;
}

namespace {

struct Candidates {
  std::vector<Pattern> patterns;
  std::vector<std::int32_t> slots;  // -1 for band-extracted patterns
  std::size_t banded = 0;           // leading patterns taken from the X band
};

// Band-extracted patterns first, then the 0.5-threshold completion of each
// slot as fallbacks; the naive ablation only thresholds.
Candidates round_candidates(const LogitTensor& theta, const AtpgConfig& cfg) {
  Candidates out;
  if (cfg.mode == OptimizerMode::kReparameterized) {
    out.patterns = extract_patterns(theta, cfg.x_lo, cfg.x_hi);
    out.slots.assign(out.patterns.size(), -1);
    out.banded = out.patterns.size();
  }
  std::set<std::string> seen;
  for (const auto& p : out.patterns) seen.insert(to_string(p));
  const std::size_t Q = theta.slots();
  for (std::size_t q = 0; q < Q; ++q) {
    Pattern p(theta.num_pis);
    for (std::size_t i = 0; i < theta.num_pis; ++i) {
      p[i] = sigmoid(theta.data[i * Q + q]) <= 0.5 ? Logic::k0 : Logic::k1;
    }
    if (seen.insert(to_string(p)).second) {
      out.patterns.push_back(std::move(p));
      out.slots.push_back(static_cast<std::int32_t>(q));
    }
  }
  return out;
}

// Greedy admission by marginal new detections; returns candidate indices.
std::vector<std::size_t> greedy_select(const CircuitGraph& graph,
                                       std::span<const Pattern> candidates,
                                       std::span<const FaultSpec> faults,
                                       std::size_t limit) {
  std::vector<std::size_t> chosen;
  if (candidates.empty() || faults.empty() || limit == 0) return chosen;
  const DetectionReport r = fault_simulate(graph, faults, candidates);
  std::vector<std::uint8_t> covered(faults.size(), 0);
  std::vector<std::uint8_t> used(candidates.size(), 0);
  while (chosen.size() < limit) {
    std::size_t best = candidates.size();
    std::size_t best_gain = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      std::size_t gain = 0;
      for (std::size_t f = 0; f < faults.size(); ++f) {
        gain += !covered[f] && r.is_detected(f, c);
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    if (best == candidates.size()) break;
    used[best] = 1;
    chosen.push_back(best);
    for (std::size_t f = 0; f < faults.size(); ++f) {
      if (r.is_detected(f, best)) covered[f] = 1;
    }
  }
  return chosen;
}

}  // namespace

RoundOutcome optimize_round(const CircuitGraph& graph,
                            std::span<const FaultSpec> targets,
                            const AtpgConfig& cfg, std::uint64_t round_seed,
                            std::size_t round_index, std::vector<TraceRow>* trace) {
  const bool naive = cfg.mode == OptimizerMode::kNaiveRelaxation;
  const std::size_t n = graph.num_pis();
  const std::size_t T = cfg.patterns_per_run;
  const std::size_t B = cfg.batches;
  const std::size_t K = naive ? 1 : cfg.noise_samples;

  MultiFaultProblem problem(graph, targets);
  RoundOutcome out;
  out.theta = init_logits(n, T, B, CounterRng(round_seed, 1), cfg.init_jitter);
  LogitTensor theta = out.theta;
  AdamAscent adam(theta.data.size());
  const CounterRng noise_rng(round_seed, 2);
  NoiseSample idle{n, theta.slots(), 1, std::vector<double>(n * theta.slots(), 0.0)};

  // Detecting hard samples seen so far this round; they join the candidates
  // at every check.
  constexpr std::size_t kPoolCap = 64;
  std::vector<Pattern> pool;
  std::vector<std::int32_t> pool_slots;
  std::set<std::string> pool_seen;
  std::size_t since_improvement = 0;
  std::size_t best_score = 0;
  bool have_best = false;
  const Schedules& sched = cfg.schedules;
  for (std::size_t it = 0; it < sched.max_iters; ++it) {
    ObjectiveParams params{sched.tau(it), sched.w_explore(it), cfg.lambda_x, cfg.mode};
    const NoiseSample noise = naive ? idle : draw_noise(noise_rng, it, n, theta.slots(), K);
    MultiFaultObjective obj = problem.evaluate(theta, noise, params);
    for (std::size_t d = 0; d < obj.detecting_samples.size(); ++d) {
      auto& p = obj.detecting_samples[d];
      if (pool.size() < kPoolCap && pool_seen.insert(to_string(p)).second) {
        pool.push_back(std::move(p));
        pool_slots.push_back(obj.detecting_slots[d]);
      }
    }
    double norm = 0.0;
    if (cfg.normalize_gradients) {
      norm = normalize_gradient(obj.grad, n, theta.slots());
    } else {
      for (double g : obj.grad) {
        if (!std::isfinite(g)) throw Error(ErrorCode::kNonFiniteGradient, "non-finite gradient");
        norm += g * g;
      }
      norm = std::sqrt(norm);
    }
    if (trace) {
      trace->push_back({round_index, it, naive ? 1.0 : params.w_explore,
                        naive ? 1.0 : params.tau, obj.breakdown, norm});
    }
    adam.step(theta.data, obj.grad, sched.lr_at(it));
    out.iterations = it + 1;

    const bool last = it + 1 == sched.max_iters;
    if ((it + 1) % cfg.check_every != 0 && !last) continue;
    Candidates cand = round_candidates(theta, cfg);
    for (std::size_t d = 0; d < pool.size(); ++d) {
      if (std::find(cand.patterns.begin(), cand.patterns.end(), pool[d]) == cand.patterns.end()) {
        cand.patterns.push_back(pool[d]);
        cand.slots.push_back(pool_slots[d]);
      }
    }
    const DetectionReport rep = fault_simulate(graph, targets, cand.patterns);
    std::size_t banded_hits = 0;
    for (std::size_t f = 0; f < targets.size(); ++f) {
      const auto first = rep.first_detection[f];
      banded_hits += first >= 0 && static_cast<std::size_t>(first) < cand.banded;
    }
    if (rep.detected_count > 0 && out.first_detection_iter == 0) out.first_detection_iter = it + 1;
    // Total detections first, then detections already carried by banded
    // (X-bearing, saturated) patterns.
    const std::size_t score = rep.detected_count * (targets.size() + 1) + banded_hits;
    if (!have_best || score > best_score) {
      have_best = true;
      best_score = score;
      out.best_detected = rep.detected_count;
      out.candidates = std::move(cand.patterns);
      out.candidate_slots = std::move(cand.slots);
      out.theta = theta;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    const bool settled = naive ? rep.detected_count == targets.size()
                               : banded_hits == targets.size();
    if (settled) break;
    const bool all_found = rep.detected_count == targets.size();
    if ((all_found || sched.w_explore(it) == 0.0) && since_improvement >= cfg.patience) break;
  }
  out.last_theta = std::move(theta);
  return out;
}

AtpgResult run_atpg(const CircuitGraph& graph, std::span<const FaultSpec> faults,
                    const AtpgConfig& cfg) {
  cfg.validate();
  AtpgResult result;
  std::vector<std::uint8_t> detected(faults.size(), 0);
  std::vector<std::uint8_t> aborted(faults.size(), 0);
  const CounterRng seeds(cfg.seed, 0x5eed);
  std::vector<std::uint32_t> misses(faults.size(), 0);
  bool retried = false;
  std::size_t attempt = 0;
  std::vector<std::size_t> target_idx;

  while (result.patterns.size() < cfg.pattern_budget) {
    // A retry re-targets the same faults under a new seed. Otherwise faults
    // that have been targeted without success the fewest times go first.
    if (!retried) {
      target_idx.clear();
      for (std::size_t f = 0; f < faults.size(); ++f) {
        if (!detected[f] && !aborted[f]) target_idx.push_back(f);
      }
      std::stable_sort(target_idx.begin(), target_idx.end(),
                       [&](std::size_t a, std::size_t b) { return misses[a] < misses[b]; });
      // Once only previously missed faults remain, they are targeted a few
      // at a time so each gets a slot of its own.
      std::size_t cap = cfg.faults_per_round;
      if (!target_idx.empty() && misses[target_idx.front()] > 0) {
        const std::size_t slots = cfg.patterns_per_run * cfg.batches;
        cap = cap ? std::min(cap, slots) : slots;
      }
      if (cap && target_idx.size() > cap) target_idx.resize(cap);
      std::sort(target_idx.begin(), target_idx.end());
    }
    if (target_idx.empty()) break;
    std::vector<FaultSpec> targets;
    for (std::size_t f : target_idx) targets.push_back(faults[f]);

    const std::uint64_t round_seed = seeds.bits({attempt++});
    RoundOutcome round =
        optimize_round(graph, targets, cfg, round_seed, result.rounds, &result.trace);
    result.iterations_used += round.iterations;
    ++result.rounds;

    std::vector<std::size_t> open;
    std::vector<FaultSpec> open_faults;
    for (std::size_t f = 0; f < faults.size(); ++f) {
      if (!detected[f]) {
        open.push_back(f);
        open_faults.push_back(faults[f]);
      }
    }
    const auto chosen = greedy_select(graph, round.candidates, open_faults,
                                      cfg.pattern_budget - result.patterns.size());
    if (chosen.empty()) {
      for (std::size_t f : target_idx) ++misses[f];
      if (!retried) {
        retried = true;
        continue;
      }
      retried = false;
      for (std::size_t f : target_idx) aborted[f] = 1;
      continue;
    }
    retried = false;
    // Each admitted pattern keeps only the specified bits needed for the
    // faults it is first to detect.
    std::vector<Pattern> admitted;
    std::vector<std::uint8_t> covered(open.size(), 0);
    const DetectionReport before = fault_simulate(graph, open_faults, round.candidates);
    for (std::size_t c : chosen) {
      std::vector<FaultSpec> keep;
      for (std::size_t k = 0; k < open.size(); ++k) {
        if (!covered[k] && before.is_detected(k, c)) keep.push_back(open_faults[k]);
      }
      Pattern p = round.candidates[c];
      if (round.candidate_slots[c] >= 0) {
        p = restore_x_bits(graph, std::move(p), round.theta,
                           static_cast<std::size_t>(round.candidate_slots[c]), cfg.x_lo,
                           cfg.x_hi, keep);
      }
      const Pattern one[] = {p};
      const DetectionReport now = fault_simulate(graph, open_faults, one);
      for (std::size_t k = 0; k < open.size(); ++k) covered[k] |= now.first_detection[k] >= 0;
      admitted.push_back(std::move(p));
    }
    const DetectionReport r = fault_simulate(graph, open_faults, admitted);
    for (std::size_t k = 0; k < open.size(); ++k) {
      if (r.first_detection[k] >= 0) detected[open[k]] = 1;
    }
    for (std::size_t f : target_idx) misses[f] += !detected[f];
    for (auto& p : admitted) result.patterns.push_back(std::move(p));
  }

  result.report = fault_simulate(graph, faults, result.patterns);
  for (std::size_t f = 0; f < faults.size(); ++f) {
    if (result.report.first_detection[f] < 0) result.undetected.push_back(faults[f]);
  }
  return result;
}

AtpgResult run_atpg(const Netlist& netlist, std::span<const FaultSpec> faults,
                    const AtpgConfig& config) {
  const CircuitGraph graph = build_graph(netlist);
  return run_atpg(graph, faults, config);
}

Pattern restore_x_bits(const CircuitGraph& graph, Pattern pattern,
                       const LogitTensor& theta, std::size_t q, double lo,
                       double hi, std::span<const FaultSpec> keep) {
  const std::size_t Q = theta.slots();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < theta.num_pis; ++i) {
    const double prob = sigmoid(theta.data[i * Q + q]);
    if (prob > lo && prob < hi && pattern[i] != Logic::kX) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(theta.data[a * Q + q]) < std::abs(theta.data[b * Q + q]);
  });
  for (std::size_t i : order) {
    Pattern trial = pattern;
    trial[i] = Logic::kX;
    const Pattern one[] = {trial};
    if (fault_simulate(graph, keep, one).detected_count == keep.size()) pattern = std::move(trial);
  }
  return pattern;
}

std::vector<std::pair<std::size_t, std::size_t>> coverage_curve(const AtpgResult& result) {
  std::vector<std::size_t> new_at(result.patterns.size(), 0);
  for (std::int64_t first : result.report.first_detection) {
    if (first >= 0) ++new_at[static_cast<std::size_t>(first)];
  }
  std::vector<std::pair<std::size_t, std::size_t>> curve;
  std::size_t total = 0;
  for (std::size_t p = 0; p < new_at.size(); ++p) {
    total += new_at[p];
    curve.emplace_back(p, total);
  }
  return curve;
}

std::string trace_csv(std::span<const TraceRow> trace) {
  std::string out =
      "round,iter,w_explore,tau,exploit,explore,x_penalty,detect_rate,"
      "grad_norm_pre_normalization\n";
  for (const auto& r : trace) {
    out += fmt::format("{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n",
                       r.round, r.iter, r.w_explore, r.tau, r.objective.exploit,
                       r.objective.explore, r.objective.x_penalty,
                       r.objective.detect_rate, r.grad_norm);
  }
  return out;
}

std::string coverage_csv(std::span<const std::pair<std::size_t, std::size_t>> curve) {
  std::string out = "pattern_index,cumulative_detected\n";
  for (const auto& [p, c] : curve) out += fmt::format("{},{}\n", p, c);
  return out;
}

}  // namespace datpg
