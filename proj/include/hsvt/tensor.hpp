#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hsvt {

using Shape = std::vector<int64_t>;

int64_t numel_of(const Shape& shape);

enum class Surrogate { ATan, Sigmoid };

// One node of the recorded computation. Nodes double as the tape: every
// primitive stores its parents and a vector-Jacobian-product closure, and
// backward() replays them in reverse topological order exactly once.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily; same length as data
  bool requires_grad = false;

  // Spike bookkeeping for the profiler: set by the spike op, carried through
  // layout ops so downstream matmuls/convs can be tagged as spike-driven.
  bool is_spike = false;
  int spike_src = -1;

  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void()> vjp;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from(const Shape& shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int64_t numel() const { return impl_->numel(); }
  int64_t dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }
  std::vector<double>& grad() { impl_->ensure_grad(); return impl_->grad; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }
  double item() const;

  Tensor detach() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Accumulates dLoss/dLeaf into every reachable leaf's grad buffer.
// `loss` must be scalar. Intermediate grads are zeroed per call; leaf grads
// accumulate until zero_grad().
void backward(const Tensor& loss);
void zero_grad(const std::vector<Tensor>& params);

// ---- primitives (all record VJPs when an input requires grad) ----

Tensor add(const Tensor& a, const Tensor& b);  // b shape == a or suffix of a
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k]x[k,n]
Tensor bmm(const Tensor& a, const Tensor& b);     // [B,m,k]x[B,k,n]

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride, int padding);
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding);

// Running stats are module state, mutated in train mode (not on the tape).
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   std::vector<double>& running_mean,
                   std::vector<double>& running_var, bool train,
                   double momentum, double eps);
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps);

Tensor softmax(const Tensor& a, int axis);
Tensor softmax_lastdim(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor emin(const Tensor& a, const Tensor& b);
Tensor emax(const Tensor& a, const Tensor& b);

Tensor sum_all(const Tensor& a);   // -> shape {1}
Tensor mean_all(const Tensor& a);

Tensor reshape(const Tensor& a, const Shape& shape);
Tensor permute(const Tensor& a, const std::vector<int>& axes);
Tensor concat(const Tensor& a, const Tensor& b, int axis);
Tensor narrow(const Tensor& a, int axis, int64_t start, int64_t len);
Tensor pad_hw(const Tensor& x, int64_t new_h, int64_t new_w);   // 4D, zero pad bottom/right
Tensor crop_hw(const Tensor& x, int64_t new_h, int64_t new_w);  // 4D
Tensor upsample2x(const Tensor& x);                             // 4D nearest

struct CellIndex { int64_t n, h, w; };
// x: [N,C,H,W], gathers the channel vector at each (n,h,w) -> [K,C]
Tensor gather_rows(const Tensor& x, const std::vector<CellIndex>& cells);

// Elementwise stable BCE on logits; `target` is treated as a constant.
Tensor bce_with_logits(const Tensor& logits, const Tensor& target);

// Spiking nonlinearity on u = v - v_threshold.
//   production (relaxed=false): forward Heaviside(u >= 0), backward g'(u)
//   relaxed: forward g(u), backward g'(u) -- fully differentiable, used by
//   the finite-difference gradient protocol
Tensor spike(const Tensor& u, Surrogate kind, double alpha, bool relaxed,
             int spike_src = -1);

// v'' = v_reset where s == 1 else v' (bit-exact); VJP matches the
// multiplicative form v' - s*(v' - v_reset).
Tensor hard_reset(const Tensor& v_prime, const Tensor& s, double v_reset);

double surrogate_value(Surrogate kind, double alpha, double u);
double surrogate_grad(Surrogate kind, double alpha, double u);

}  // namespace hsvt
