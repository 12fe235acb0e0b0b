#include "hsvt/neurons.hpp"

#include <stdexcept>

namespace hsvt {

namespace {
int g_next_spike_layer_id = 0;
}

int allocate_spike_layer_id() { return g_next_spike_layer_id++; }

std::pair<Tensor, NeuronState> neuron_step(const NeuronConfig& cfg,
                                           const NeuronState& state,
                                           const Tensor& input,
                                           int spike_layer_id) {
  if (cfg.kind == NeuronKind::LIF && cfg.tau <= 1.0) {
    throw std::invalid_argument("LIF requires tau > 1");
  }
  if (cfg.v_threshold <= cfg.v_reset) {
    throw std::invalid_argument("v_threshold must exceed v_reset");
  }
  Tensor v = state.v.defined() ? state.v
                               : Tensor::full(input.shape(), cfg.v_reset);
  if (v.shape() != input.shape()) {
    throw std::invalid_argument("neuron state shape does not match input");
  }

  Tensor v_prime;
  if (cfg.kind == NeuronKind::IF) {
    v_prime = add(v, input);
  } else {
    // v' = v + (x - (v - v_reset)) / tau
    v_prime = add(v, mul_scalar(sub(input, add_scalar(v, -cfg.v_reset)), 1.0 / cfg.tau));
  }
  Tensor u = add_scalar(v_prime, -cfg.v_threshold);
  Tensor s = spike(u, cfg.surrogate, cfg.alpha, cfg.relaxed, spike_layer_id);

  Tensor v_next;
  if (cfg.relaxed) {
    // Differentiable reset, matched by the finite-difference protocol.
    v_next = sub(v_prime, mul(s, add_scalar(v_prime, -cfg.v_reset)));
  } else {
    v_next = hard_reset(v_prime, s, cfg.v_reset);
  }
  return {s, NeuronState{v_next}};
}

SpikingMlp::SpikingMlp(std::string path, int64_t channels, int expansion_ratio,
                       int spiking_layers, const NeuronConfig& cfg, Rng& rng)
    : Module(std::move(path)), neuron_cfg(cfg) {
  if (spiking_layers < 1) throw std::invalid_argument("need >= 1 spiking layer");
  const int64_t hidden = channels * expansion_ratio;
  layers.push_back(std::make_unique<Linear>(path_ + ".fc0", channels, hidden, true, rng));
  for (int i = 1; i < spiking_layers; ++i) {
    layers.push_back(std::make_unique<Linear>(path_ + ".fc" + std::to_string(i),
                                              hidden, hidden, true, rng));
  }
  layers.push_back(std::make_unique<Linear>(path_ + ".proj", hidden, channels, true, rng));
  for (int i = 0; i < spiking_layers; ++i) spike_ids.push_back(allocate_spike_layer_id());
}

Tensor SpikingMlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    layers[i]->timesteps = timesteps;
    h = layers[i]->forward(h);
    if (i + 1 < layers.size()) {
      // transient neuron state: fresh membrane each window
      auto [s, st] = neuron_step(neuron_cfg, NeuronState{}, h,
                                 spike_ids[i]);
      h = s;
    }
  }
  return h;
}

void SpikingMlp::collect(std::vector<NamedTensor>& out) const {
  for (const auto& l : layers) l->collect(out);
}

}  // namespace hsvt
