#include "hsvt/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "hsvt/costing.hpp"

namespace hsvt {

// ------------------------------------------------------------------- linear

Linear::Linear(std::string path, int64_t in, int64_t out, bool with_bias, Rng& rng)
    : Module(std::move(path)), in_features(in), out_features(out) {
  const double k = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> w(static_cast<size_t>(in * out));
  for (auto& v : w) v = rng.uniform(-k, k);
  weight = Tensor::from({in, out}, std::move(w), true);
  if (with_bias) {
    std::vector<double> b(static_cast<size_t>(out));
    for (auto& v : b) v = rng.uniform(-k, k);
    bias = Tensor::from({out}, std::move(b), true);
  }
}

Tensor Linear::forward(const Tensor& x) const {
  if (costing::enabled()) {
    const int64_t rows = x.numel() / in_features;
    costing::record_op(path_, "linear",
                       2.0 * static_cast<double>(rows * in_features * out_features),
                       x.impl()->is_spike, x.impl()->spike_src, timesteps);
  }
  Tensor y = matmul(x, weight);
  if (bias.defined()) y = add(y, bias);
  return y;
}

void Linear::collect(std::vector<NamedTensor>& out) const {
  out.push_back({path_ + ".weight", weight, false});
  if (bias.defined()) out.push_back({path_ + ".bias", bias, false});
}

int64_t Linear::param_count() const {
  return in_features * out_features + (bias.defined() ? out_features : 0);
}

// -------------------------------------------------------------------- conv

Conv2d::Conv2d(std::string path, int64_t in_ch, int64_t out_ch, int kernel_,
               int stride_, int padding_, bool with_bias, Rng& rng)
    : Module(std::move(path)),
      in_channels(in_ch),
      out_channels(out_ch),
      kernel(kernel_),
      stride(stride_),
      padding(padding_) {
  const double k = 1.0 / std::sqrt(static_cast<double>(in_ch * kernel_ * kernel_));
  std::vector<double> w(static_cast<size_t>(out_ch * in_ch * kernel_ * kernel_));
  for (auto& v : w) v = rng.uniform(-k, k);
  weight = Tensor::from({out_ch, in_ch, kernel_, kernel_}, std::move(w), true);
  if (with_bias) {
    std::vector<double> b(static_cast<size_t>(out_ch));
    for (auto& v : b) v = rng.uniform(-k, k);
    bias = Tensor::from({out_ch}, std::move(b), true);
  }
}

Tensor Conv2d::forward(const Tensor& x) const {
  if (costing::enabled()) {
    const int64_t H = x.dim(2), W = x.dim(3);
    const int64_t Ho = (H + 2 * padding - kernel) / stride + 1;
    const int64_t Wo = (W + 2 * padding - kernel) / stride + 1;
    costing::record_op(path_, "conv",
                       2.0 * static_cast<double>(x.dim(0) * out_channels * Ho * Wo *
                                                 in_channels * kernel * kernel),
                       x.impl()->is_spike, x.impl()->spike_src, timesteps);
  }
  if (bias.defined()) return conv2d(x, weight, bias, stride, padding);
  return conv2d(x, weight, stride, padding);
}

void Conv2d::collect(std::vector<NamedTensor>& out) const {
  out.push_back({path_ + ".weight", weight, false});
  if (bias.defined()) out.push_back({path_ + ".bias", bias, false});
}

int64_t Conv2d::param_count() const {
  return out_channels * in_channels * kernel * kernel +
         (bias.defined() ? out_channels : 0);
}

// --------------------------------------------------------------------- norm

BatchNorm2d::BatchNorm2d(std::string path, int64_t channels)
    : Module(std::move(path)), channels_(channels) {
  gamma = Tensor::full({channels}, 1.0, true);
  beta = Tensor::zeros({channels}, true);
  running_mean_t = Tensor::zeros({channels});
  running_var_t = Tensor::full({channels}, 1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  return batchnorm2d(x, gamma, beta, running_mean_t.data(), running_var_t.data(),
                     train, momentum, eps);
}

void BatchNorm2d::collect(std::vector<NamedTensor>& out) const {
  out.push_back({path_ + ".gamma", gamma, false});
  out.push_back({path_ + ".beta", beta, false});
  out.push_back({path_ + ".running_mean", running_mean_t, true});
  out.push_back({path_ + ".running_var", running_var_t, true});
}

LayerNorm::LayerNorm(std::string path, int64_t channels) : Module(std::move(path)) {
  gamma = Tensor::full({channels}, 1.0, true);
  beta = Tensor::zeros({channels}, true);
}

Tensor LayerNorm::forward(const Tensor& x) const {
  return layernorm(x, gamma, beta, eps);
}

void LayerNorm::collect(std::vector<NamedTensor>& out) const {
  out.push_back({path_ + ".gamma", gamma, false});
  out.push_back({path_ + ".beta", beta, false});
}

// --------------------------------------------------------------- checkpoint

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  put_u64(os, u);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  const uint64_t u = get_u64(is);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

constexpr char kMagic[8] = {'H', 'S', 'V', 'T', 'C', 'K', 'P', 'T'};

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& entries) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  os.write(kMagic, 8);
  put_u32(os, 1);
  put_u32(os, static_cast<uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put_u32(os, static_cast<uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_u32(os, static_cast<uint32_t>(e.tensor.shape().size()));
    for (int64_t d : e.tensor.shape()) put_u64(os, static_cast<uint64_t>(d));
    for (double v : e.tensor.data()) put_f64(os, v);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

void load_checkpoint(const std::string& path, std::vector<NamedTensor>& entries) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic: " + path);
  }
  const uint32_t version = get_u32(is);
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
  const uint32_t count = get_u32(is);
  std::vector<NamedTensor*> by_order;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t nlen = get_u32(is);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    const uint32_t ndim = get_u32(is);
    Shape shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int64_t>(get_u64(is));
    const int64_t n = numel_of(shape);
    std::vector<double> data(static_cast<size_t>(n));
    for (auto& v : data) v = get_f64(is);

    NamedTensor* target = nullptr;
    for (auto& e : entries) {
      if (e.name == name) {
        target = &e;
        break;
      }
    }
    if (!target) continue;  // extra entries are ignored
    if (target->tensor.shape() != shape) {
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    }
    target->tensor.data() = std::move(data);
  }
}

}  // namespace hsvt
