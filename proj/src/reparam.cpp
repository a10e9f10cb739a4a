#include "datpg/reparam.hpp"

#include <cmath>
#include <numbers>

#include "datpg/error.hpp"

namespace datpg {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LogitTensor init_logits(std::size_t num_pis, std::size_t T, std::size_t B,
                        const CounterRng& rng, double jitter) {
  LogitTensor theta{num_pis, T, B, std::vector<double>(num_pis * T * B)};
  for (std::size_t e = 0; e < theta.data.size(); ++e) {
    theta.data[e] = jitter * (2.0 * rng.uniform({e}, 0.0) - 1.0);
  }
  return theta;
}

double logistic_from_uniform(double u) { return std::log(u) - std::log1p(-u); }

NoiseSample draw_noise(const CounterRng& rng, std::uint64_t iteration,
                       std::size_t num_pis, std::size_t slots, std::size_t K) {
  NoiseSample noise{num_pis, slots, K, std::vector<double>(num_pis * slots * K)};
  for (std::size_t i = 0; i < num_pis; ++i) {
    for (std::size_t q = 0; q < slots; ++q) {
      for (std::size_t k = 0; k < K; ++k) {
        noise.epsilon[(i * slots + q) * K + k] =
            logistic_from_uniform(rng.uniform({iteration, i, q, k}));
      }
    }
  }
  return noise;
}

namespace {

void check_shapes(const LogitTensor& theta, const NoiseSample& noise) {
  if (theta.num_pis != noise.num_pis || theta.slots() != noise.slots ||
      theta.data.size() != theta.num_pis * theta.slots() ||
      noise.epsilon.size() != noise.num_pis * noise.samples()) {
    throw Error(ErrorCode::kShapeMismatch, "logit and noise shapes differ");
  }
}

}  // namespace

std::vector<std::uint8_t> sample_hard(const LogitTensor& theta,
                                      const NoiseSample& noise) {
  check_shapes(theta, noise);
  const std::size_t Q = noise.slots, K = noise.samples_per_slot;
  std::vector<std::uint8_t> x(noise.epsilon.size());
  for (std::size_t i = 0; i < theta.num_pis; ++i) {
    for (std::size_t q = 0; q < Q; ++q) {
      const double logit = theta.data[i * Q + q];
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t e = (i * Q + q) * K + k;
        x[e] = logit + noise.epsilon[e] > 0.0;
      }
    }
  }
  return x;
}

std::vector<double> sample_soft(const LogitTensor& theta, const NoiseSample& noise,
                                double tau) {
  if (!(tau > 0.0)) {
    throw Error(ErrorCode::kNonpositiveTemperature, "temperature must be positive");
  }
  check_shapes(theta, noise);
  const std::size_t Q = noise.slots, K = noise.samples_per_slot;
  std::vector<double> x(noise.epsilon.size());
  for (std::size_t i = 0; i < theta.num_pis; ++i) {
    for (std::size_t q = 0; q < Q; ++q) {
      const double logit = theta.data[i * Q + q];
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t e = (i * Q + q) * K + k;
        x[e] = sigmoid((logit + noise.epsilon[e]) / tau);
      }
    }
  }
  return x;
}

double Schedules::tau(std::size_t iter) const {
  if (max_iters <= 1) return tau_start;
  const double frac = std::min(1.0, static_cast<double>(iter) /
                                        static_cast<double>(max_iters - 1));
  return tau_start * std::pow(tau_end / tau_start, frac);
}

double Schedules::w_explore(std::size_t iter) const {
  const double horizon = explore_fraction * static_cast<double>(max_iters);
  if (horizon <= 0.0) return 0.0;
  return std::max(0.0, 1.0 - static_cast<double>(iter) / horizon);
}

double Schedules::lr_at(std::size_t iter) const {
  const double frac = std::min(1.0, static_cast<double>(iter) /
                                        static_cast<double>(std::max<std::size_t>(1, max_iters)));
  return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

SampledObjective exploit_objective(std::span<const double> S,
                                   std::span<const std::uint8_t> I) {
  if (S.size() != I.size() || S.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "exploit_objective: shape mismatch");
  }
  const double inv_k = 1.0 / static_cast<double>(S.size());
  SampledObjective out{0.0, std::vector<double>(S.size(), 0.0)};
  for (std::size_t k = 0; k < S.size(); ++k) {
    if (!I[k]) continue;
    out.value += S[k] * inv_k;
    out.weight[k] = inv_k;
  }
  return out;
}

SampledObjective explore_objective(std::span<const double> S) {
  if (S.empty()) throw Error(ErrorCode::kShapeMismatch, "explore_objective: no samples");
  const double inv_k = 1.0 / static_cast<double>(S.size());
  SampledObjective out{0.0, std::vector<double>(S.size(), inv_k)};
  for (double s : S) out.value += s * inv_k;
  return out;
}

ObjectiveBreakdown combine(double exploit, double explore, double x_penalty,
                           double w_explore) {
  ObjectiveBreakdown b;
  b.exploit = exploit;
  b.explore = explore;
  b.x_penalty = x_penalty;
  b.combined = (1.0 - w_explore) * exploit + w_explore * explore - x_penalty;
  return b;
}

PenaltyResult x_penalty(std::span<const double> x_soft, std::size_t num_pis,
                        std::size_t T, std::size_t B, std::size_t K, double lambda) {
  if (lambda < 0.0) throw Error(ErrorCode::kNegativeLambda, "lambda must be >= 0");
  if (x_soft.size() != num_pis * T * B * K) {
    throw Error(ErrorCode::kShapeMismatch, "x_penalty: shape mismatch");
  }
  PenaltyResult r{0.0, std::vector<double>(x_soft.size(), 0.0)};
  if (lambda == 0.0) return r;
  const double scale = lambda / static_cast<double>(K * B);
  double sum = 0.0;
  for (std::size_t e = 0; e < x_soft.size(); ++e) {
    const double d = x_soft[e] - 0.5;
    sum += std::abs(d);
    r.grad[e] = d > 0.0 ? scale : d < 0.0 ? -scale : 0.0;
  }
  r.value = scale * sum;
  return r;
}

double normalize_gradient(std::span<double> grad, std::size_t num_pis,
                          std::size_t slots) {
  if (grad.size() != num_pis * slots) {
    throw Error(ErrorCode::kShapeMismatch, "normalize_gradient: shape mismatch");
  }
  constexpr double kEpsNorm = 1e-12;
  double total = 0.0;
  for (double g : grad) {
    if (!std::isfinite(g)) throw Error(ErrorCode::kNonFiniteGradient, "non-finite gradient");
    total += g * g;
  }
  for (std::size_t q = 0; q < slots; ++q) {
    double sq = 0.0;
    for (std::size_t i = 0; i < num_pis; ++i) sq += grad[i * slots + q] * grad[i * slots + q];
    const double scale = 1.0 / std::max(std::sqrt(sq), kEpsNorm);
    for (std::size_t i = 0; i < num_pis; ++i) grad[i * slots + q] *= scale;
  }
  return std::sqrt(total);
}

AdamAscent::AdamAscent(std::size_t size, double beta1, double beta2, double eps)
    : m_(size, 0.0), v_(size, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamAscent::step(std::span<double> theta, std::span<const double> grad, double lr) {
  if (theta.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "AdamAscent::step: shape mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t e = 0; e < theta.size(); ++e) {
    m_[e] = beta1_ * m_[e] + (1.0 - beta1_) * grad[e];
    v_[e] = beta2_ * v_[e] + (1.0 - beta2_) * grad[e] * grad[e];
    const double update = lr * (m_[e] / c1) / (std::sqrt(v_[e] / c2) + eps_);
    const double next = theta[e] + update;
    if (!std::isfinite(next)) {
      throw Error(ErrorCode::kNonFiniteUpdate, "logit update is not finite");
    }
    theta[e] = next;
  }
}

}  // namespace datpg
