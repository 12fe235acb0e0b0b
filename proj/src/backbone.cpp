#include "hsvt/backbone.hpp"

#include <cmath>
#include <stdexcept>

#include "hsvt/costing.hpp"
#include "hsvt/errors.hpp"

namespace hsvt {

TemporalKind temporal_kind_from_string(const std::string& s) {
  if (s == "lstm" || s == "LSTM") return TemporalKind::LSTM;
  if (s == "stfe" || s == "STFE") return TemporalKind::STFE;
  if (s == "plainnet" || s == "PlainNet") return TemporalKind::PlainNet;
  if (s == "feedbacknet" || s == "FeedBackNet") return TemporalKind::FeedBackNet;
  if (s == "statefulsynapse" || s == "StatefulSynapse") return TemporalKind::StatefulSynapse;
  if (s == "none" || s == "None") return TemporalKind::None;
  throw ValidationError("unknown temporal module kind: " + s);
}

std::string to_string(TemporalKind k) {
  switch (k) {
    case TemporalKind::LSTM: return "lstm";
    case TemporalKind::STFE: return "stfe";
    case TemporalKind::PlainNet: return "plainnet";
    case TemporalKind::FeedBackNet: return "feedbacknet";
    case TemporalKind::StatefulSynapse: return "statefulsynapse";
    case TemporalKind::None: return "none";
  }
  return "?";
}

BackboneConfig BackboneConfig::variant(const std::string& name) {
  BackboneConfig c;
  if (name == "tiny") {
    c.channels = {32, 64, 128, 256};
  } else if (name == "small") {
    c.channels = {48, 96, 192, 384};
  } else if (name == "base") {
    c.channels = {64, 128, 256, 512};
  } else {
    throw ValidationError("unknown model variant: " + name);
  }
  return c;
}

// --------------------------------------------------------------- partitions

Tensor window_partition(const Tensor& x, int64_t P) {
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % P != 0 || W % P != 0) {
    throw std::invalid_argument("window_partition: extent not divisible by P");
  }
  Tensor r = reshape(x, {N, C, H / P, P, W / P, P});
  Tensor p = permute(r, {0, 2, 4, 3, 5, 1});
  return reshape(p, {N * (H / P) * (W / P), P * P, C});
}

Tensor window_unpartition(const Tensor& tokens, int64_t N, int64_t C, int64_t H,
                          int64_t W, int64_t P) {
  Tensor r = reshape(tokens, {N, H / P, W / P, P, P, C});
  Tensor p = permute(r, {0, 5, 1, 3, 2, 4});
  return reshape(p, {N, C, H, W});
}

Tensor grid_partition(const Tensor& x, int64_t G) {
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % G != 0 || W % G != 0) {
    throw std::invalid_argument("grid_partition: extent not divisible by G");
  }
  Tensor r = reshape(x, {N, C, G, H / G, G, W / G});
  Tensor p = permute(r, {0, 3, 5, 2, 4, 1});
  return reshape(p, {N * (H / G) * (W / G), G * G, C});
}

Tensor grid_unpartition(const Tensor& tokens, int64_t N, int64_t C, int64_t H,
                        int64_t W, int64_t G) {
  Tensor r = reshape(tokens, {N, H / G, W / G, G, G, C});
  Tensor p = permute(r, {0, 5, 3, 1, 4, 2});
  return reshape(p, {N, C, H, W});
}

Tensor rows_from_4d(const Tensor& x) {
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  return reshape(permute(x, {0, 2, 3, 1}), {N * H * W, C});
}

Tensor rows_to_4d(const Tensor& rows, int64_t N, int64_t C, int64_t H, int64_t W) {
  return permute(reshape(rows, {N, H, W, C}), {0, 3, 1, 2});
}

namespace {

// Token validity in exactly the order the partition ops emit, 1 = real pixel.
std::vector<double> partition_validity(int64_t N, int64_t H, int64_t W,
                                       int64_t Hp, int64_t Wp, int64_t S,
                                       bool grid) {
  if (Hp == H && Wp == W) return {};
  std::vector<double> valid;
  valid.reserve(static_cast<size_t>(N * Hp * Wp));
  const int64_t gy = Hp / S, gx = Wp / S;  // window counts or cell extents
  for (int64_t n = 0; n < N; ++n) {
    if (!grid) {
      for (int64_t wy = 0; wy < gy; ++wy)
        for (int64_t wx = 0; wx < gx; ++wx)
          for (int64_t py = 0; py < S; ++py)
            for (int64_t px = 0; px < S; ++px) {
              const int64_t y = wy * S + py, x = wx * S + px;
              valid.push_back(y < H && x < W ? 1.0 : 0.0);
            }
    } else {
      for (int64_t ry = 0; ry < gy; ++ry)
        for (int64_t rx = 0; rx < gx; ++rx)
          for (int64_t gyy = 0; gyy < S; ++gyy)
            for (int64_t gxx = 0; gxx < S; ++gxx) {
              const int64_t y = gyy * gy + ry, x = gxx * gx + rx;
              valid.push_back(y < H && x < W ? 1.0 : 0.0);
            }
    }
  }
  return valid;
}

int64_t round_up(int64_t v, int64_t m) { return (v + m - 1) / m * m; }

}  // namespace

// ---------------------------------------------------------------- attention

MultiHeadSelfAttention::MultiHeadSelfAttention(std::string path, int64_t channels_,
                                               int heads_, Rng& rng)
    : Module(std::move(path)), heads(heads_), channels(channels_) {
  if (channels_ % heads_ != 0) {
    throw std::invalid_argument("attention: channels not divisible by heads");
  }
  wq = std::make_unique<Linear>(path_ + ".wq", channels_, channels_, true, rng);
  wk = std::make_unique<Linear>(path_ + ".wk", channels_, channels_, true, rng);
  wv = std::make_unique<Linear>(path_ + ".wv", channels_, channels_, true, rng);
  wo = std::make_unique<Linear>(path_ + ".wo", channels_, channels_, true, rng);
}

Tensor MultiHeadSelfAttention::forward(const Tensor& tokens,
                                       const std::vector<double>& key_valid) const {
  const int64_t B = tokens.dim(0), T = tokens.dim(1), C = tokens.dim(2);
  const int64_t h = heads, d = C / heads;
  wq->timesteps = wk->timesteps = wv->timesteps = wo->timesteps = timesteps;

  Tensor flat = reshape(tokens, {B * T, C});
  auto split_heads = [&](const Tensor& m) {
    return reshape(permute(reshape(m, {B, T, h, d}), {0, 2, 1, 3}), {B * h, T, d});
  };
  Tensor q = split_heads(wq->forward(flat));
  Tensor k = split_heads(wk->forward(flat));
  Tensor v = split_heads(wv->forward(flat));

  if (costing::enabled()) {
    const double f = 2.0 * static_cast<double>(B * h * T * T * d);
    costing::record_op(path_ + ".qk", "attn_matmul", f, tokens.impl()->is_spike,
                       tokens.impl()->spike_src, timesteps);
    costing::record_op(path_ + ".av", "attn_matmul", f, tokens.impl()->is_spike,
                       tokens.impl()->spike_src, timesteps);
  }

  Tensor logits = mul_scalar(bmm(q, permute(k, {0, 2, 1})), 1.0 / std::sqrt(double(d)));
  if (!key_valid.empty()) {
    std::vector<double> m(static_cast<size_t>(B * h * T * T), 0.0);
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t j = 0; j < T; ++j) {
        if (key_valid[static_cast<size_t>(b * T + j)] > 0.5) continue;
        for (int64_t hh = 0; hh < h; ++hh) {
          for (int64_t i = 0; i < T; ++i) {
            m[static_cast<size_t>(((b * h + hh) * T + i) * T + j)] = -1e9;
          }
        }
      }
    }
    logits = add(logits, Tensor::from({B * h, T, T}, std::move(m)));
  }
  Tensor att = softmax_lastdim(logits);
  if (retain) last_weights = att.detach();
  Tensor out = bmm(att, v);
  out = reshape(permute(reshape(out, {B, h, T, d}), {0, 2, 1, 3}), {B * T, C});
  return reshape(wo->forward(out), {B, T, C});
}

void MultiHeadSelfAttention::collect(std::vector<NamedTensor>& out) const {
  wq->collect(out);
  wk->collect(out);
  wv->collect(out);
  wo->collect(out);
}

// ------------------------------------------------------------ spatial block

SpatialBlock::SpatialBlock(std::string path, int64_t channels, int window_size_,
                           int grid_size_, int heads, int mlp_ratio,
                           int mlp_spiking_layers, const NeuronConfig& neuron,
                           Rng& rng)
    : Module(std::move(path)), window_size(window_size_), grid_size(grid_size_) {
  ln1 = std::make_unique<LayerNorm>(path_ + ".ln1", channels);
  ln2 = std::make_unique<LayerNorm>(path_ + ".ln2", channels);
  ln3 = std::make_unique<LayerNorm>(path_ + ".ln3", channels);
  ln4 = std::make_unique<LayerNorm>(path_ + ".ln4", channels);
  block_sa = std::make_unique<MultiHeadSelfAttention>(path_ + ".block_sa", channels,
                                                      heads, rng);
  grid_sa = std::make_unique<MultiHeadSelfAttention>(path_ + ".grid_sa", channels,
                                                     heads, rng);
  mlp1 = std::make_unique<SpikingMlp>(path_ + ".mlp1", channels, mlp_ratio,
                                      mlp_spiking_layers, neuron, rng);
  mlp2 = std::make_unique<SpikingMlp>(path_ + ".mlp2", channels, mlp_ratio,
                                      mlp_spiking_layers, neuron, rng);
}

void SpatialBlock::set_timesteps(double t) {
  block_sa->timesteps = t;
  grid_sa->timesteps = t;
  mlp1->timesteps = t;
  mlp2->timesteps = t;
}

Tensor SpatialBlock::forward(const Tensor& x) const {
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor cur = x;

  // Block-SA over local P x P windows
  {
    const int64_t P = std::min<int64_t>(window_size, std::min(H, W));
    const int64_t Hp = round_up(H, P), Wp = round_up(W, P);
    Tensor xp = (Hp != H || Wp != W) ? pad_hw(cur, Hp, Wp) : cur;
    Tensor tokens = window_partition(xp, P);
    Tensor att = block_sa->forward(ln1->forward(tokens),
                                   partition_validity(N, H, W, Hp, Wp, P, false));
    Tensor y = window_unpartition(att, N, C, Hp, Wp, P);
    if (Hp != H || Wp != W) y = crop_hw(y, H, W);
    cur = add(cur, y);
  }
  // SpikingMLP
  {
    Tensor rows = rows_from_4d(cur);
    Tensor y = mlp1->forward(ln2->forward(rows));
    cur = add(cur, rows_to_4d(y, N, C, H, W));
  }
  // Grid-SA over dilated G x G groups
  {
    const int64_t G = std::min<int64_t>(grid_size, std::min(H, W));
    const int64_t Hp = round_up(H, G), Wp = round_up(W, G);
    Tensor xp = (Hp != H || Wp != W) ? pad_hw(cur, Hp, Wp) : cur;
    Tensor tokens = grid_partition(xp, G);
    Tensor att = grid_sa->forward(ln3->forward(tokens),
                                  partition_validity(N, H, W, Hp, Wp, G, true));
    Tensor y = grid_unpartition(att, N, C, Hp, Wp, G);
    if (Hp != H || Wp != W) y = crop_hw(y, H, W);
    cur = add(cur, y);
  }
  // second SpikingMLP
  {
    Tensor rows = rows_from_4d(cur);
    Tensor y = mlp2->forward(ln4->forward(rows));
    cur = add(cur, rows_to_4d(y, N, C, H, W));
  }
  return cur;
}

void SpatialBlock::collect(std::vector<NamedTensor>& out) const {
  ln1->collect(out);
  block_sa->collect(out);
  ln2->collect(out);
  mlp1->collect(out);
  ln3->collect(out);
  grid_sa->collect(out);
  ln4->collect(out);
  mlp2->collect(out);
}

// --------------------------------------------------------------- state

void StageState::detach() {
  if (h.defined()) h = h.detach();
  if (c.defined()) c = c.detach();
  if (a.defined()) a = a.detach();
  if (mem1.defined()) mem1 = mem1.detach();
  if (mem2.defined()) mem2 = mem2.detach();
}

void StageState::reset() { *this = StageState{}; }

void HsVTState::detach_all() {
  for (auto& s : stages) s.detach();
}

void HsVTState::reset_all() {
  for (auto& s : stages) s.reset();
}

// ---------------------------------------------------------- temporal modules

int64_t TemporalModule::param_count() const {
  std::vector<NamedTensor> all;
  collect(all);
  int64_t n = 0;
  for (const auto& e : all) {
    if (!e.buffer) n += e.tensor.numel();
  }
  return n;
}

namespace {

class LstmTemporal : public TemporalModule {
 public:
  LstmTemporal(std::string path, int64_t channels, Rng& rng)
      : TemporalModule(std::move(path)), c_(channels) {
    fused_ = std::make_unique<Linear>(path_ + ".cell", 2 * channels, 4 * channels,
                                      true, rng);
  }

  Tensor forward(const Tensor& x, StageState& st, bool) override {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    fused_->timesteps = timesteps;
    Tensor rows = rows_from_4d(x);
    Tensor h = st.h.defined() ? st.h : Tensor::zeros({N * H * W, C});
    Tensor c = st.c.defined() ? st.c : Tensor::zeros({N * H * W, C});
    Tensor z = fused_->forward(concat(rows, h, 1));
    Tensor i = sigmoid(narrow(z, 1, 0, C));
    Tensor f = sigmoid(narrow(z, 1, C, C));
    Tensor o = sigmoid(narrow(z, 1, 2 * C, C));
    Tensor g = tanh_op(narrow(z, 1, 3 * C, C));
    Tensor c_new = add(mul(f, c), mul(i, g));
    Tensor h_new = mul(o, tanh_op(c_new));
    st.h = h_new;
    st.c = c_new;
    return rows_to_4d(h_new, N, C, H, W);
  }

  void collect(std::vector<NamedTensor>& out) const override { fused_->collect(out); }

 private:
  int64_t c_;
  std::unique_ptr<Linear> fused_;
};

class StfeTemporal : public TemporalModule {
 public:
  StfeTemporal(std::string path, int64_t channels, const NeuronConfig& cfg, Rng& rng)
      : TemporalModule(std::move(path)), cfg_(cfg) {
    conv_ = std::make_unique<Conv2d>(path_ + ".conv", channels, channels, 1, 1, 0,
                                     true, rng);
    bn_ = std::make_unique<BatchNorm2d>(path_ + ".bn", channels);
    rec_ = std::make_unique<Linear>(path_ + ".rec", 2 * channels, channels, true, rng);
    sid_in_ = allocate_spike_layer_id();
    sid_h_ = allocate_spike_layer_id();
  }

  Tensor forward(const Tensor& x, StageState& st, bool train) override {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    conv_->timesteps = timesteps;
    rec_->timesteps = timesteps;
    Tensor pre = bn_->forward(conv_->forward(x), train);
    auto [s4, st1] = neuron_step(cfg_, NeuronState{st.mem1}, pre, sid_in_);
    st.mem1 = st1.v;
    Tensor s = rows_from_4d(s4);
    Tensor h = st.h.defined() ? st.h : Tensor::zeros({N * H * W, C});
    Tensor u = rec_->forward(concat(s, h, 1));
    auto [h_new, st2] = neuron_step(cfg_, NeuronState{st.mem2}, u, sid_h_);
    st.mem2 = st2.v;
    st.h = h_new;
    return rows_to_4d(h_new, N, C, H, W);
  }

  void collect(std::vector<NamedTensor>& out) const override {
    conv_->collect(out);
    bn_->collect(out);
    rec_->collect(out);
  }

 private:
  NeuronConfig cfg_;
  std::unique_ptr<Conv2d> conv_;
  std::unique_ptr<BatchNorm2d> bn_;
  std::unique_ptr<Linear> rec_;
  int sid_in_, sid_h_;
};

class PlainTemporal : public TemporalModule {
 public:
  enum class Mode { Plain, FeedBack, Stateful };

  PlainTemporal(std::string path, int64_t channels, const NeuronConfig& cfg,
                Mode mode, Rng& rng)
      : TemporalModule(std::move(path)), cfg_(cfg), mode_(mode) {
    w_ = std::make_unique<Linear>(path_ + ".w", 2 * channels, channels, false, rng);
    sid_ = allocate_spike_layer_id();
    sid2_ = allocate_spike_layer_id();
  }

  Tensor forward(const Tensor& x, StageState& st, bool) override {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    w_->timesteps = timesteps;
    Tensor rows = rows_from_4d(x);
    Tensor h = st.h.defined() ? st.h : Tensor::zeros({N * H * W, C});
    Tensor u = w_->forward(concat(rows, h, 1));
    Tensor out;
    if (mode_ == Mode::Plain) {
      auto [s, ns] = neuron_step(cfg_, NeuronState{}, u, sid_);
      out = s;
    } else if (mode_ == Mode::FeedBack) {
      auto [s1, ns1] = neuron_step(cfg_, NeuronState{}, u, sid_);
      Tensor u2 = w_->forward(concat(rows, s1, 1));
      auto [s2, ns2] = neuron_step(cfg_, NeuronState{}, u2, sid2_);
      out = s2;
    } else {
      const double lambda = 0.5;
      Tensor a = st.a.defined() ? st.a : Tensor::zeros({N * H * W, C});
      Tensor a_new = add(mul_scalar(a, lambda), mul_scalar(u, 1.0 - lambda));
      auto [s, ns] = neuron_step(cfg_, NeuronState{}, a_new, sid_);
      st.a = a_new;
      out = s;
    }
    st.h = out;
    return rows_to_4d(out, N, C, H, W);
  }

  void collect(std::vector<NamedTensor>& out) const override { w_->collect(out); }

 private:
  NeuronConfig cfg_;
  Mode mode_;
  std::unique_ptr<Linear> w_;
  int sid_, sid2_;
};

}  // namespace

std::unique_ptr<TemporalModule> make_temporal(TemporalKind kind, std::string path,
                                              int64_t channels,
                                              const NeuronConfig& neuron, Rng& rng) {
  switch (kind) {
    case TemporalKind::LSTM:
      return std::make_unique<LstmTemporal>(std::move(path), channels, rng);
    case TemporalKind::STFE:
      return std::make_unique<StfeTemporal>(std::move(path), channels, neuron, rng);
    case TemporalKind::PlainNet:
      return std::make_unique<PlainTemporal>(std::move(path), channels, neuron,
                                             PlainTemporal::Mode::Plain, rng);
    case TemporalKind::FeedBackNet:
      return std::make_unique<PlainTemporal>(std::move(path), channels, neuron,
                                             PlainTemporal::Mode::FeedBack, rng);
    case TemporalKind::StatefulSynapse:
      return std::make_unique<PlainTemporal>(std::move(path), channels, neuron,
                                             PlainTemporal::Mode::Stateful, rng);
    case TemporalKind::None:
      return nullptr;
  }
  return nullptr;
}

// -------------------------------------------------------------------- stage

Stage::Stage(std::string path, int index, const BackboneConfig& cfg,
             int64_t in_channels, Rng& rng)
    : Module(std::move(path)), additive_fusion(cfg.additive_fusion) {
  const int64_t C = cfg.channels[static_cast<size_t>(index)];
  const int k = cfg.kernels[static_cast<size_t>(index)];
  const int s = cfg.strides[static_cast<size_t>(index)];
  down = std::make_unique<Conv2d>(path_ + ".down", in_channels, C, k, s, k / 2,
                                  true, rng);
  int heads = (C % cfg.head_dim == 0) ? static_cast<int>(C / cfg.head_dim) : 1;
  spatial = std::make_unique<SpatialBlock>(path_ + ".spatial", C, cfg.window_size,
                                           cfg.grid_size, heads, cfg.mlp_ratio,
                                           cfg.mlp_spiking_layers, cfg.neuron, rng);
  temporal = make_temporal(cfg.placement[static_cast<size_t>(index)],
                           path_ + "." + to_string(cfg.placement[static_cast<size_t>(index)]),
                           C, cfg.neuron, rng);
}

Tensor Stage::forward(const Tensor& x, StageState& st, bool train) {
  Tensor y = spatial->forward(down->forward(x));
  if (!temporal) return y;
  Tensor t = temporal->forward(y, st, train);
  return additive_fusion ? add(y, t) : t;
}

void Stage::collect(std::vector<NamedTensor>& out) const {
  down->collect(out);
  spatial->collect(out);
  if (temporal) temporal->collect(out);
}

// -------------------------------------------------------------------- model

HsVT::HsVT(const BackboneConfig& config, Rng& rng)
    : Module("backbone"), cfg(config) {
  int64_t in_ch = cfg.input_channels();
  for (int i = 0; i < 4; ++i) {
    stages[static_cast<size_t>(i)] = std::make_unique<Stage>(
        path_ + ".stage" + std::to_string(i + 1), i, cfg, in_ch, rng);
    in_ch = cfg.channels[static_cast<size_t>(i)];
  }
  // The stem consumes the t_bins sub-bin detail; its spiking timesteps per
  // window are t_bins, later stages run one step per window.
  stages[0]->down->timesteps = cfg.t_bins;
  stages[0]->spatial->set_timesteps(cfg.t_bins);
  if (stages[0]->temporal) stages[0]->temporal->timesteps = cfg.t_bins;
}

std::array<Tensor, 4> HsVT::forward(const Tensor& window, HsVTState& st, bool train) {
  if (window.ndim() != 4 || window.dim(1) != cfg.input_channels()) {
    throw std::invalid_argument("hsvt: input channels must equal 2*t_bins");
  }
  if (window.dim(2) % 32 != 0 || window.dim(3) % 32 != 0) {
    throw std::invalid_argument("hsvt: spatial extent must be divisible by 32 (pad first)");
  }
  std::array<Tensor, 4> outs;
  Tensor cur = window;
  for (size_t i = 0; i < 4; ++i) {
    cur = stages[i]->forward(cur, st.stages[i], train);
    outs[i] = cur;
  }
  return outs;
}

void HsVT::collect(std::vector<NamedTensor>& out) const {
  for (const auto& s : stages) s->collect(out);
}

void HsVT::set_retain_attention(bool v) {
  for (const auto& s : stages) {
    s->spatial->block_sa->retain = v;
    s->spatial->grid_sa->retain = v;
  }
}

}  // namespace hsvt
