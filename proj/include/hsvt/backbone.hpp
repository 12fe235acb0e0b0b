#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "hsvt/neurons.hpp"
#include "hsvt/nn.hpp"
#include "hsvt/tensor.hpp"

namespace hsvt {

enum class TemporalKind { LSTM, STFE, PlainNet, FeedBackNet, StatefulSynapse, None };

TemporalKind temporal_kind_from_string(const std::string& s);
std::string to_string(TemporalKind k);

struct BackboneConfig {
  std::array<int64_t, 4> channels{32, 64, 128, 256};
  std::array<int, 4> kernels{7, 3, 3, 3};
  std::array<int, 4> strides{4, 2, 2, 2};
  int t_bins = 10;
  int window_size = 8;  // P
  int grid_size = 8;    // G
  int head_dim = 8;
  int mlp_ratio = 4;
  int mlp_spiking_layers = 2;
  NeuronConfig neuron = NeuronConfig::with_surrogate(Surrogate::ATan);
  std::array<TemporalKind, 4> placement{TemporalKind::LSTM, TemporalKind::LSTM,
                                        TemporalKind::LSTM, TemporalKind::STFE};
  bool additive_fusion = false;  // stage output = spatial + temporal instead of
                                 // the temporal output alone

  // tiny: 32/64/128/256, small: 48/96/192/384, base: 64/128/256/512
  static BackboneConfig variant(const std::string& name);
  int64_t input_channels() const { return 2 * t_bins; }
};

// ---- partitioning (input must be divisible; pad beforehand) ----

// [N,C,H,W] -> [(N*H/P*W/P), P*P, C], non-overlapping P x P windows.
Tensor window_partition(const Tensor& x, int64_t P);
Tensor window_unpartition(const Tensor& tokens, int64_t N, int64_t C, int64_t H,
                          int64_t W, int64_t P);

// Dilated variant: group (r_y, r_x) gathers pixels y = g_y*(H/G) + r_y,
// giving each attention group global extent.
Tensor grid_partition(const Tensor& x, int64_t G);
Tensor grid_unpartition(const Tensor& tokens, int64_t N, int64_t C, int64_t H,
                        int64_t W, int64_t G);

class MultiHeadSelfAttention : public Module {
 public:
  MultiHeadSelfAttention(std::string path, int64_t channels, int heads, Rng& rng);
  // tokens: [B, T, C]; key_valid (optional): B*T entries of 1/0 built from the
  // padding mask; padded keys receive a large negative logit.
  Tensor forward(const Tensor& tokens, const std::vector<double>& key_valid) const;
  void collect(std::vector<NamedTensor>& out) const override;

  std::unique_ptr<Linear> wq, wk, wv, wo;
  int heads;
  int64_t channels;
  double timesteps = 1.0;
  bool retain = false;
  mutable Tensor last_weights;  // [B*heads, T, T], detached
};

// Pre-norm residual sublayers, in order:
// Block-SA, SpikingMLP, Grid-SA, SpikingMLP.
class SpatialBlock : public Module {
 public:
  SpatialBlock(std::string path, int64_t channels, int window_size, int grid_size,
               int heads, int mlp_ratio, int mlp_spiking_layers,
               const NeuronConfig& neuron, Rng& rng);
  Tensor forward(const Tensor& x) const;  // [N,C,H,W] -> same shape
  void collect(std::vector<NamedTensor>& out) const override;
  void set_timesteps(double t);

  std::unique_ptr<LayerNorm> ln1, ln2, ln3, ln4;
  std::unique_ptr<MultiHeadSelfAttention> block_sa, grid_sa;
  std::unique_ptr<SpikingMlp> mlp1, mlp2;
  int window_size, grid_size;
};

struct StageState {
  Tensor h, c;        // LSTM carry / spiking hidden
  Tensor a;           // synaptic trace (StatefulSynapse)
  Tensor mem1, mem2;  // persistent membranes (STFE)
  void detach();
  void reset();
};

class TemporalModule : public Module {
 public:
  using Module::Module;
  virtual Tensor forward(const Tensor& x, StageState& st, bool train) = 0;
  int64_t param_count() const;
  double timesteps = 1.0;
};

std::unique_ptr<TemporalModule> make_temporal(TemporalKind kind, std::string path,
                                              int64_t channels,
                                              const NeuronConfig& neuron, Rng& rng);

class Stage : public Module {
 public:
  Stage(std::string path, int index, const BackboneConfig& cfg, int64_t in_channels,
        Rng& rng);
  Tensor forward(const Tensor& x, StageState& st, bool train);
  void collect(std::vector<NamedTensor>& out) const override;

  std::unique_ptr<Conv2d> down;
  std::unique_ptr<SpatialBlock> spatial;
  std::unique_ptr<TemporalModule> temporal;  // null for TemporalKind::None
  bool additive_fusion = false;
};

struct HsVTState {
  std::array<StageState, 4> stages;
  void detach_all();
  void reset_all();
};

// Four-stage hybrid backbone. Each window flows stage by stage
// (downsample conv, spatial block, temporal mix with the carried state);
// the recurrent state propagates across consecutive windows.
class HsVT : public Module {
 public:
  HsVT(const BackboneConfig& config, Rng& rng);
  // window: [N, 2*t_bins, H, W]; H, W divisible by 32.
  std::array<Tensor, 4> forward(const Tensor& window, HsVTState& st, bool train);
  void collect(std::vector<NamedTensor>& out) const override;
  void set_retain_attention(bool v);

  BackboneConfig cfg;
  std::array<std::unique_ptr<Stage>, 4> stages;
};

// [N,C,H,W] <-> [N*H*W, C] token views used by MLPs and temporal modules.
Tensor rows_from_4d(const Tensor& x);
Tensor rows_to_4d(const Tensor& rows, int64_t N, int64_t C, int64_t H, int64_t W);

}  // namespace hsvt
