#include <doctest.h>

#include <cmath>
#include <random>

#include "datpg/error.hpp"
#include "datpg/reparam.hpp"

using namespace datpg;

TEST_SUITE("reparam") {

TEST_CASE("sigmoid is stable at the tails") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
}

TEST_CASE("hard sample frequency tracks sigmoid") {
  constexpr std::size_t N = 100000;
  for (int t = -2; t <= 2; ++t) {
    const LogitTensor theta{1, 1, 1, {static_cast<double>(t)}};
    const auto noise = draw_noise(CounterRng(3, 4), 0, 1, 1, N);
    const auto hard = sample_hard(theta, noise);
    double hits = 0;
    for (auto h : hard) hits += h;
    const double p = sigmoid(t);
    CHECK(std::abs(hits / N - p) <= 3 * std::sqrt(p * (1 - p) / N));
  }
}

TEST_CASE("noise is reproducible and slot-addressed") {
  const CounterRng rng(11);
  const auto a = draw_noise(rng, 5, 3, 4, 2);
  const auto b = draw_noise(rng, 5, 3, 4, 2);
  CHECK(a.epsilon == b.epsilon);
  CHECK(a.epsilon != draw_noise(rng, 6, 3, 4, 2).epsilon);
  CHECK(a.samples() == 8);
  CHECK(logistic_from_uniform(0.5) == 0.0);
}

TEST_CASE("soft samples approach hard samples as tau falls") {
  LogitTensor theta{2, 2, 1, {0.3, -1.0, 2.0, 0.1}};
  const auto noise = draw_noise(CounterRng(1), 0, 2, 2, 16);
  const auto hard = sample_hard(theta, noise);
  const auto soft = sample_soft(theta, noise, 1e-3);
  for (std::size_t e = 0; e < hard.size(); ++e) {
    // Samples whose pre-activation is within ~1e-2 of 0 stay soft.
    if (std::abs(theta.data[e / 16] + noise.epsilon[e]) < 0.05) continue;
    CHECK(std::abs(soft[e] - hard[e]) < 1e-2);
  }
  CHECK_THROWS_AS(sample_soft(theta, noise, 0.0), Error);
  NoiseSample wrong = noise;
  wrong.slots = 3;
  CHECK_THROWS_AS(sample_hard(theta, wrong), Error);
}

TEST_CASE("init logits") {
  const auto theta = init_logits(3, 4, 2, CounterRng(0), 0.01);
  CHECK(theta.data.size() == 24);
  for (double v : theta.data) CHECK(std::abs(v) <= 0.01);
  CHECK(theta.data != init_logits(3, 4, 2, CounterRng(1), 0.01).data);
  for (double v : init_logits(3, 4, 2, CounterRng(0), 0.0).data) CHECK(v == 0.0);
}

TEST_CASE("schedules") {
  Schedules s;
  CHECK(s.tau(0) == doctest::Approx(5.0));
  CHECK(s.tau(999) == doctest::Approx(0.5));
  CHECK(s.tau(500) < s.tau(499));
  CHECK(s.w_explore(0) == 1.0);
  CHECK(s.w_explore(250) == doctest::Approx(0.5));
  CHECK(s.w_explore(500) == 0.0);
  CHECK(s.w_explore(900) == 0.0);
  CHECK(s.lr_at(0) == doctest::Approx(0.1));
  CHECK(s.lr_at(500) == doctest::Approx(0.05));
}

TEST_CASE("exploit and explore objectives") {
  const double S[] = {0.5, 0.8, 0.2, 0.9};
  const std::uint8_t I[] = {1, 0, 0, 1};
  const auto ex = exploit_objective(S, I);
  CHECK(ex.value == doctest::Approx(0.35));
  CHECK(ex.weight == std::vector<double>{0.25, 0.0, 0.0, 0.25});
  const std::uint8_t none[] = {0, 0, 0, 0};
  CHECK(exploit_objective(S, none).value == 0.0);
  const std::uint8_t all[] = {1, 1, 1, 1};
  CHECK(exploit_objective(S, all).value == doctest::Approx(0.6));
  const double two[] = {0.2, 0.4};
  CHECK(explore_objective(two).value == doctest::Approx(0.3));
  const double zero[] = {0.0, 0.0};
  CHECK(explore_objective(zero).value == 0.0);
  CHECK_THROWS_AS(exploit_objective(two, I), Error);
}

TEST_CASE("combine") {
  CHECK(combine(0.4, 0.8, 0.1, 0.25).combined == doctest::Approx(0.4));
  CHECK(combine(0.4, 0.8, 0.1, 1.0).combined == doctest::Approx(0.7));
  CHECK(combine(0.4, 0.8, 0.1, 0.0).combined == doctest::Approx(0.3));
}

TEST_CASE("x penalty") {
  const std::size_t n = 3, T = 2, B = 1, K = 1;
  std::vector<double> mid(n * T * B * K, 0.5);
  CHECK(x_penalty(mid, n, T, B, K, 1.0).value == 0.0);
  std::vector<double> corner(n * T * B * K);
  for (std::size_t e = 0; e < corner.size(); ++e) corner[e] = e % 2;
  CHECK(x_penalty(corner, n, T, B, K, 0.1).value == doctest::Approx(0.1 * 0.5 * n * T));
  CHECK(x_penalty(corner, n, T, B, K, 0.0).value == 0.0);
  CHECK_THROWS_AS(x_penalty(corner, n, T, B, K, -1.0), Error);
  // Averaging over K and B keeps the value fixed when samples are replicated.
  std::vector<double> rep(n * T * 2 * 4);
  for (std::size_t e = 0; e < rep.size(); ++e) rep[e] = (e / 4) % 2;
  CHECK(x_penalty(rep, n, T, 2, 4, 0.1).value == doctest::Approx(2 * 0.1 * 0.5 * n * T / 2));
}

TEST_CASE("gradient normalization") {
  std::vector<double> g{3.0, 4.0};
  CHECK(normalize_gradient(g, 2, 1) == doctest::Approx(5.0));
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
  std::vector<double> z(4, 0.0);
  normalize_gradient(z, 2, 2);
  CHECK(z == std::vector<double>(4, 0.0));
  std::mt19937_64 gen(2);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 6, slots = 3;
    std::vector<double> v(n * slots);
    for (auto& x : v) x = nd(gen);
    auto w = v;
    normalize_gradient(w, n, slots);
    for (std::size_t q = 0; q < slots; ++q) {
      double nv = 0, nw = 0;
      for (std::size_t i = 0; i < n; ++i) {
        nv += v[i * slots + q] * v[i * slots + q];
        nw += w[i * slots + q] * w[i * slots + q];
      }
      CHECK(nw == doctest::Approx(1.0));
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(w[i * slots + q] == doctest::Approx(v[i * slots + q] / std::sqrt(nv)));
      }
    }
  }
  std::vector<double> bad{1.0, NAN};
  CHECK_THROWS_AS(normalize_gradient(bad, 2, 1), Error);
}

TEST_CASE("adam ascent") {
  AdamAscent adam(2);
  std::vector<double> theta{0.5, -0.5};
  const std::vector<double> zero(2, 0.0);
  adam.step(theta, zero, 0.1);
  CHECK(theta == std::vector<double>{0.5, -0.5});
  const std::vector<double> push{1.0, 0.0};
  double last = theta[0];
  for (int k = 0; k < 20; ++k) {
    adam.step(theta, push, 0.1);
    CHECK(theta[0] > last);
    last = theta[0];
  }
  CHECK(theta[1] == -0.5);
  std::vector<double> huge{1.7e308, 0.0};
  AdamAscent fresh(2);
  CHECK_THROWS_AS(fresh.step(huge, std::vector<double>{1.0, 0.0}, 1e308), Error);
}

}  // TEST_SUITE
