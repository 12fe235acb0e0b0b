#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "hsvt/tensor.hpp"

namespace hsvt {

// Single RNG drives all weight init and data shuffling so a fixed seed gives
// byte-identical checkpoints and logs.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(eng_);
  }
  int64_t randint(int64_t lo, int64_t hi) {  // inclusive
    return std::uniform_int_distribution<int64_t>(lo, hi)(eng_);
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool buffer = false;  // running stats etc.; excluded from the optimizer
};

class Module {
 public:
  explicit Module(std::string path) : path_(std::move(path)) {}
  virtual ~Module() = default;
  const std::string& path() const { return path_; }

  virtual void collect(std::vector<NamedTensor>& out) const = 0;

  std::vector<Tensor> parameters() const {
    std::vector<NamedTensor> all;
    collect(all);
    std::vector<Tensor> out;
    for (auto& nt : all) {
      if (!nt.buffer) out.push_back(nt.tensor);
    }
    return out;
  }

 protected:
  std::string path_;
};

class Linear : public Module {
 public:
  // Weight stored [in, out] so forward is a plain matmul.
  Linear(std::string path, int64_t in, int64_t out, bool with_bias, Rng& rng);
  Tensor forward(const Tensor& x) const;  // x: [M, in]
  void collect(std::vector<NamedTensor>& out) const override;
  int64_t param_count() const;
  double timesteps = 1.0;

  Tensor weight;
  Tensor bias;  // undefined when constructed without bias
  int64_t in_features, out_features;
};

class Conv2d : public Module {
 public:
  Conv2d(std::string path, int64_t in_ch, int64_t out_ch, int kernel, int stride,
         int padding, bool with_bias, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(std::vector<NamedTensor>& out) const override;
  int64_t param_count() const;
  double timesteps = 1.0;

  Tensor weight;  // [O, C, k, k]
  Tensor bias;
  int64_t in_channels, out_channels;
  int kernel, stride, padding;
};

class BatchNorm2d : public Module {
 public:
  BatchNorm2d(std::string path, int64_t channels);
  Tensor forward(const Tensor& x, bool train);
  void collect(std::vector<NamedTensor>& out) const override;
  int64_t param_count() const { return 2 * channels_; }

  Tensor gamma, beta;
  Tensor running_mean_t, running_var_t;  // buffers, mirrored into vectors below
  double momentum = 0.1;
  double eps = 1e-5;

 private:
  int64_t channels_;
};

class LayerNorm : public Module {
 public:
  LayerNorm(std::string path, int64_t channels);
  Tensor forward(const Tensor& x) const;
  void collect(std::vector<NamedTensor>& out) const override;

  Tensor gamma, beta;
  double eps = 1e-5;
};

// Flat parameter container: "HSVTCKPT", u32 version, u32 count, then per
// entry u32 name_len + name + u32 ndim + u64 dims + little-endian f64 data.
void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& entries);
void load_checkpoint(const std::string& path, std::vector<NamedTensor>& entries);

}  // namespace hsvt
