#include "hsvt/costing.hpp"

namespace hsvt::costing {

namespace {
Recorder* g_recorder = nullptr;
}

SpikeCounter& Recorder::counter(int layer_id) {
  for (auto& c : spikes) {
    if (c.layer_id == layer_id) return c;
  }
  spikes.push_back(SpikeCounter{layer_id, 0.0, 0.0});
  return spikes.back();
}

Recorder* active() { return g_recorder; }
void set_active(Recorder* r) { g_recorder = r; }
bool enabled() { return g_recorder != nullptr; }

void record_op(const std::string& path, const std::string& kind, double flops,
               bool is_spiking, int spike_src, double timesteps) {
  if (!g_recorder) return;
  g_recorder->ops.push_back({path, kind, flops, is_spiking, spike_src, timesteps});
}

void record_spikes(int layer_id, double spike_count, double neuron_steps) {
  if (!g_recorder) return;
  auto& c = g_recorder->counter(layer_id);
  c.spikes += spike_count;
  c.neuron_steps += neuron_steps;
}

}  // namespace hsvt::costing
