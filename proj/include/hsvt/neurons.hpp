#pragma once

#include <memory>
#include <utility>

#include "hsvt/nn.hpp"
#include "hsvt/tensor.hpp"

namespace hsvt {

enum class NeuronKind { LIF, IF };

struct NeuronConfig {
  NeuronKind kind = NeuronKind::LIF;
  double v_threshold = 1.0;
  double v_reset = 0.0;
  double tau = 2.0;  // LIF only, > 1
  Surrogate surrogate = Surrogate::ATan;
  double alpha = 2.0;  // defaults give g'(0) = 1 for both surrogates
  bool relaxed = false;

  static NeuronConfig with_surrogate(Surrogate s) {
    NeuronConfig c;
    c.surrogate = s;
    c.alpha = (s == Surrogate::ATan) ? 2.0 : 4.0;
    return c;
  }
};

struct NeuronState {
  Tensor v;  // membrane potential, same shape as the input; empty = at reset
};

// Discrete LIF/IF step with hard reset.
//   charge: IF  v' = v + x
//           LIF v' = v + (x - (v - v_reset)) / tau
//   fire:   s = 1 where v' >= v_threshold
//   reset:  v'' = v_reset where s = 1 else v'
// spike_layer_id feeds the profiler's firing-rate counters.
std::pair<Tensor, NeuronState> neuron_step(const NeuronConfig& cfg,
                                           const NeuronState& state,
                                           const Tensor& input,
                                           int spike_layer_id = -1);

// Stable id per spiking site so firing rates can be reported per layer.
int allocate_spike_layer_id();

// Feed-forward sublayer with a spiking hidden activation:
// linear C -> r*C, then `spiking_layers` spiking stages (each followed by a
// linear except the last, which feeds the neuron-free output projection
// r*C -> C). Neuron state is transient per call.
class SpikingMlp : public Module {
 public:
  SpikingMlp(std::string path, int64_t channels, int expansion_ratio,
             int spiking_layers, const NeuronConfig& cfg, Rng& rng);

  Tensor forward(const Tensor& x) const;  // x: [tokens, C]
  void collect(std::vector<NamedTensor>& out) const override;

  NeuronConfig neuron_cfg;
  std::vector<std::unique_ptr<Linear>> layers;  // n_spiking + 1 linears
  std::vector<int> spike_ids;
  double timesteps = 1.0;
};

}  // namespace hsvt
