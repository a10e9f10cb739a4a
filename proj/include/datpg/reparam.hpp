#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "datpg/rng.hpp"

namespace datpg {

double sigmoid(double x);

// Trainable input logits, [num_pis x T x B]. A slot q = t * B + b names one
// candidate pattern; the element for (i, q) lives at i * slots() + q.
struct LogitTensor {
  std::size_t num_pis = 0;
  std::size_t patterns = 0;  // T
  std::size_t batches = 0;   // B
  std::vector<double> data;

  std::size_t slots() const { return patterns * batches; }
  double& at(std::size_t i, std::size_t t, std::size_t b) {
    return data[i * slots() + t * batches + b];
  }
  double at(std::size_t i, std::size_t t, std::size_t b) const {
    return data[i * slots() + t * batches + b];
  }
};

// theta_hat = 0 plus uniform jitter in [-jitter, jitter] per element.
LogitTensor init_logits(std::size_t num_pis, std::size_t T, std::size_t B,
                        const CounterRng& rng, double jitter = 0.01);

// Standard logistic noise, [num_pis x slots x K]. Flattened over
// (slot, k) this is the engine's sample axis s = q * K + k.
struct NoiseSample {
  std::size_t num_pis = 0;
  std::size_t slots = 0;
  std::size_t samples_per_slot = 0;  // K
  std::vector<double> epsilon;

  std::size_t samples() const { return slots * samples_per_slot; }
};

double logistic_from_uniform(double u);
NoiseSample draw_noise(const CounterRng& rng, std::uint64_t iteration,
                       std::size_t num_pis, std::size_t slots, std::size_t K);

// 1 iff theta_hat + epsilon > 0; result is [num_pis x samples].
std::vector<std::uint8_t> sample_hard(const LogitTensor& theta,
                                      const NoiseSample& noise);
// sigmoid((theta_hat + epsilon) / tau); result is [num_pis x samples].
std::vector<double> sample_soft(const LogitTensor& theta,
                                const NoiseSample& noise, double tau);

struct Schedules {
  std::size_t max_iters = 1000;
  double tau_start = 5.0;
  double tau_end = 0.5;
  double explore_fraction = 0.5;  // w_explore reaches 0 at this run fraction
  double lr = 0.1;

  // Exponential anneal tau_start -> tau_end over the run.
  double tau(std::size_t iter) const;
  // Linear 1 -> 0 over the first explore_fraction of the run, then 0.
  double w_explore(std::size_t iter) const;
  // Cosine decay from lr to 0.
  double lr_at(std::size_t iter) const;
};

struct ObjectiveBreakdown {
  double exploit = 0.0;
  double explore = 0.0;
  double x_penalty = 0.0;
  double combined = 0.0;
  double detect_rate = 0.0;
};

// Monte Carlo value plus d value / d S per sample.
struct SampledObjective {
  double value = 0.0;
  std::vector<double> weight;
};

// mean_k S_k * I_k; the indicator is a constant gate on the S gradient.
SampledObjective exploit_objective(std::span<const double> S,
                                   std::span<const std::uint8_t> I);
// mean_k S_k.
SampledObjective explore_objective(std::span<const double> S);

ObjectiveBreakdown combine(double exploit, double explore, double x_penalty,
                           double w_explore);

struct PenaltyResult {
  double value = 0.0;
  std::vector<double> grad;  // d value / d x_soft, [num_pis x samples]
};

// lambda * sum_i sum_t |x_soft - 0.5|, averaged over the K and B axes.
PenaltyResult x_penalty(std::span<const double> x_soft, std::size_t num_pis,
                        std::size_t T, std::size_t B, std::size_t K,
                        double lambda);

// Rescales each slot's gradient column to unit l2 norm (zero stays zero).
// grad is [num_pis x slots]. Returns the global l2 norm before scaling.
double normalize_gradient(std::span<double> grad, std::size_t num_pis,
                          std::size_t slots);

// Adaptive-moment gradient ascent.
class AdamAscent {
 public:
  explicit AdamAscent(std::size_t size, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8);

  void step(std::span<double> theta, std::span<const double> grad, double lr);
  std::size_t steps() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

}  // namespace datpg
