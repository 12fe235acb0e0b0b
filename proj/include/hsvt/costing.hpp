#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hsvt::costing {

struct OpCostRecord {
  std::string path;     // module path, e.g. "backbone.stage3.lstm"
  std::string kind;     // "linear", "conv", "attn_matmul", ...
  double flops = 0.0;   // 1 MAC = 2 FLOPs; bias/norm/elementwise excluded
  bool is_spiking = false;
  int spike_src = -1;   // id of the neuron layer feeding this op, -1 if none
  double timesteps = 1.0;
};

struct SpikeCounter {
  int layer_id = -1;
  double spikes = 0.0;
  double neuron_steps = 0.0;
};

// Global (single training/profiling thread) instrumentation sink. Layers and
// the spike op report into it only while enabled.
class Recorder {
 public:
  void clear() { ops.clear(); spikes.clear(); }
  SpikeCounter& counter(int layer_id);

  std::vector<OpCostRecord> ops;
  std::vector<SpikeCounter> spikes;
};

Recorder* active();
void set_active(Recorder* r);
bool enabled();

void record_op(const std::string& path, const std::string& kind, double flops,
               bool is_spiking, int spike_src, double timesteps);
void record_spikes(int layer_id, double spike_count, double neuron_steps);

}  // namespace hsvt::costing
