#include "doctest.h"

#include <cmath>

#include "hsvt/gradcheck.hpp"
#include "hsvt/neurons.hpp"
#include "hsvt/nn.hpp"

using namespace hsvt;

TEST_CASE("randomized spiking invariants: binary output, exact hard reset") {
  Rng rng(31);
  const int64_t n_neurons = 1000, n_steps = 120;  // 1.2e5 neuron-steps
  for (NeuronKind kind : {NeuronKind::LIF, NeuronKind::IF}) {
    NeuronConfig cfg;
    cfg.kind = kind;
    NeuronState st;
    int64_t violations = 0;
    for (int64_t step = 0; step < n_steps; ++step) {
      std::vector<double> in(static_cast<size_t>(n_neurons));
      for (auto& v : in) v = rng.uniform(-1.0, 2.0);
      Tensor x = Tensor::from({n_neurons}, std::move(in));
      Tensor v_before = st.v.defined() ? st.v : Tensor::full({n_neurons}, cfg.v_reset);
      auto [s, next] = neuron_step(cfg, st, x);
      for (int64_t i = 0; i < n_neurons; ++i) {
        const size_t k = static_cast<size_t>(i);
        const double spike_v = s.data()[k];
        if (spike_v != 0.0 && spike_v != 1.0) ++violations;
        const double vp = (kind == NeuronKind::IF)
                              ? v_before.data()[k] + x.data()[k]
                              : v_before.data()[k] +
                                    (x.data()[k] - (v_before.data()[k] - cfg.v_reset)) / cfg.tau;
        if (spike_v == 1.0) {
          if (vp < cfg.v_threshold) ++violations;
          if (next.v.data()[k] != cfg.v_reset) ++violations;  // bit-exact reset
        } else {
          if (vp >= cfg.v_threshold) ++violations;
          if (next.v.data()[k] != vp) ++violations;
        }
      }
      st = next;
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("IF neuron fires with exact periodicity under constant drive") {
  NeuronConfig cfg;
  cfg.kind = NeuronKind::IF;
  Tensor x = Tensor::from({1}, {0.25});  // threshold 1 -> every 4th step
  NeuronState st;
  for (int step = 1; step <= 40; ++step) {
    auto [s, next] = neuron_step(cfg, st, x);
    st = next;
    CHECK(s.data()[0] == (step % 4 == 0 ? 1.0 : 0.0));
  }
}

TEST_CASE("LIF membrane decays monotonically toward v_reset without input") {
  NeuronConfig cfg;
  NeuronState st;
  st.v = Tensor::from({1}, {0.9});
  Tensor zero = Tensor::zeros({1});
  double prev = 0.9;
  for (int step = 0; step < 30; ++step) {
    auto [s, next] = neuron_step(cfg, st, zero);
    CHECK(s.data()[0] == 0.0);
    CHECK(next.v.data()[0] < prev);
    CHECK(next.v.data()[0] >= cfg.v_reset);
    prev = next.v.data()[0];
    st = next;
  }
  CHECK(prev < 1e-4);  // essentially back at rest
}

TEST_CASE("surrogate derivatives match their closed forms and peak at 1") {
  // atan: g'(u) = alpha / (2 (1 + ((pi/2) alpha u)^2)), alpha = 2
  CHECK(surrogate_grad(Surrogate::ATan, 2.0, 0.0) == doctest::Approx(1.0));
  for (double u : {-1.5, -0.3, 0.2, 2.0}) {
    const double expect = 2.0 / (2.0 * (1.0 + std::pow(M_PI / 2.0 * 2.0 * u, 2)));
    CHECK(surrogate_grad(Surrogate::ATan, 2.0, u) == doctest::Approx(expect));
  }
  // sigmoid: g'(u) = alpha s(1-s), s = sigmoid(alpha u), alpha = 4
  CHECK(surrogate_grad(Surrogate::Sigmoid, 4.0, 0.0) == doctest::Approx(1.0));
  for (double u : {-1.0, 0.5, 1.2}) {
    const double s = 1.0 / (1.0 + std::exp(-4.0 * u));
    CHECK(surrogate_grad(Surrogate::Sigmoid, 4.0, u) == doctest::Approx(4.0 * s * (1.0 - s)));
  }
  // relaxed forward value g(u) has g(0) = 1/2 for both families
  CHECK(surrogate_value(Surrogate::ATan, 2.0, 0.0) == doctest::Approx(0.5));
  CHECK(surrogate_value(Surrogate::Sigmoid, 4.0, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("relaxed mode passes finite-difference checks through two steps") {
  Rng rng(32);
  for (Surrogate kind : {Surrogate::ATan, Surrogate::Sigmoid}) {
    NeuronConfig cfg = NeuronConfig::with_surrogate(kind);
    cfg.relaxed = true;
    std::vector<double> in(8);
    for (auto& v : in) v = rng.uniform(-0.5, 1.5);
    const double err = grad_check(
        [&](const std::vector<Tensor>& ins) {
          auto [s1, st1] = neuron_step(cfg, NeuronState{}, ins[0]);
          auto [s2, st2] = neuron_step(cfg, st1, ins[0]);
          return sum_all(add(s1, add(s2, st2.v)));
        },
        {Tensor::from({8}, in, true)});
    CHECK(err < 1e-5);
  }
}

TEST_CASE("production and relaxed modes agree on spike-path gradients") {
  // for a loss that depends only on the spike output, both modes backpropagate
  // exactly g'(u) into the pre-activation
  Tensor u = Tensor::from({5}, {-1.0, -0.2, 0.0, 0.4, 1.3}, true);
  NeuronConfig cfg;

  Tensor s_prod = spike(u, cfg.surrogate, cfg.alpha, /*relaxed=*/false);
  backward(sum_all(s_prod));
  std::vector<double> g_prod = u.grad();
  zero_grad({u});

  Tensor s_rel = spike(u, cfg.surrogate, cfg.alpha, /*relaxed=*/true);
  backward(sum_all(s_rel));
  CHECK(u.grad() == g_prod);

  for (int i = 0; i < 5; ++i) {
    CHECK(g_prod[static_cast<size_t>(i)] ==
          doctest::Approx(surrogate_grad(cfg.surrogate, cfg.alpha, u.data()[static_cast<size_t>(i)])));
  }
}

TEST_CASE("neuron configuration validation") {
  NeuronConfig cfg;
  cfg.tau = 1.0;
  CHECK_THROWS(neuron_step(cfg, NeuronState{}, Tensor::zeros({2})));
  cfg = NeuronConfig{};
  cfg.v_threshold = 0.0;
  cfg.v_reset = 0.0;
  CHECK_THROWS(neuron_step(cfg, NeuronState{}, Tensor::zeros({2})));
  cfg = NeuronConfig{};
  NeuronState st;
  st.v = Tensor::zeros({3});
  CHECK_THROWS(neuron_step(cfg, st, Tensor::zeros({2})));  // shape mismatch
}

TEST_CASE("spiking MLP shapes, binary hidden activity, and gradients") {
  Rng rng(33);
  NeuronConfig cfg;
  SpikingMlp mlp("mlp", 6, 4, 2, cfg, rng);
  CHECK(mlp.layers.size() == 3);  // fc0, fc1, proj
  std::vector<double> in(12);
  for (auto& v : in) v = rng.uniform(-1, 1);
  Tensor x = Tensor::from({2, 6}, in, true);
  Tensor y = mlp.forward(x);
  CHECK(y.shape() == Shape{2, 6});

  backward(sum_all(y));
  double gsum = 0;
  auto params = mlp.parameters();
  for (auto& p : params) {
    for (double g : p.grad()) gsum += std::abs(g);
  }
  CHECK(gsum > 0.0);  // surrogate path reaches the weights
}
