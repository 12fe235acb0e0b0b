#include "hsvt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "hsvt/costing.hpp"

namespace hsvt {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::shared_ptr<TensorImpl> make_impl(const Shape& shape) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
  return impl;
}

void check_finite(const TensorImpl& t, const char* op) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string("non-finite value produced by ") + op);
    }
  }
}

bool track(const Tensor& a) { return a.impl()->requires_grad; }

// Marks the result as grad-requiring and wires parents when any input needs
// gradients. The vjp closure is installed by the caller afterwards.
void connect(const std::shared_ptr<TensorImpl>& out,
             std::initializer_list<Tensor> inputs) {
  bool any = false;
  for (const auto& t : inputs) {
    if (t.impl()->requires_grad) any = true;
  }
  if (!any) return;
  out->requires_grad = true;
  for (const auto& t : inputs) {
    if (t.impl()->requires_grad) out->parents.push_back(t.impl());
  }
}

void check_suffix_broadcast(const Shape& a, const Shape& b, const char* op) {
  if (b.size() > a.size()) {
    throw std::invalid_argument(std::string(op) + ": broadcast shape too large");
  }
  for (size_t i = 0; i < b.size(); ++i) {
    if (b[b.size() - 1 - i] != a[a.size() - 1 - i]) {
      throw std::invalid_argument(std::string(op) + ": shapes not broadcastable");
    }
  }
}

std::vector<int64_t> strides_of(const Shape& shape) {
  std::vector<int64_t> st(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
    st[static_cast<size_t>(i)] =
        st[static_cast<size_t>(i) + 1] * shape[static_cast<size_t>(i) + 1];
  }
  return st;
}

}  // namespace

int64_t numel_of(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor extents must be positive");
    n *= d;
  }
  return n;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  auto impl = make_impl(shape);
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  auto impl = make_impl(shape);
  std::fill(impl->data.begin(), impl->data.end(), value);
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values,
                    bool requires_grad) {
  if (numel_of(shape) != static_cast<int64_t>(values.size())) {
    throw std::invalid_argument("Tensor::from: data length does not match shape");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  check_finite(*impl, "Tensor::from");
  return Tensor(impl);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() requires a scalar tensor");
  return impl_->data[0];
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->is_spike = impl_->is_spike;
  impl->spike_src = impl_->spike_src;
  return Tensor(impl);
}

void backward(const Tensor& loss) {
  auto root = loss.impl();
  if (!root) throw std::invalid_argument("backward: undefined tensor");
  if (root->numel() != 1) throw std::invalid_argument("backward: loss must be scalar");

  // Post-order DFS over parents; `order` ends with the root.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  struct Frame {
    TensorImpl* node;
    size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      TensorImpl* p = f.node->parents[f.next++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  for (TensorImpl* n : order) {
    n->ensure_grad();
    if (n->vjp) std::fill(n->grad.begin(), n->grad.end(), 0.0);  // non-leaf
  }
  root->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->vjp) (*it)->vjp();
  }
}

void zero_grad(const std::vector<Tensor>& params) {
  for (const auto& p : params) {
    p.impl()->ensure_grad();
    std::fill(p.impl()->grad.begin(), p.impl()->grad.end(), 0.0);
  }
}

// ---------------------------------------------------------------- arithmetic

namespace {

template <typename Fwd, typename Bwd>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, const char* name,
                        Fwd fwd, Bwd bwd) {
  check_suffix_broadcast(a.shape(), b.shape(), name);
  auto out = make_impl(a.shape());
  const auto& ad = a.data();
  const auto& bd = b.data();
  const size_t bn = bd.size();
  for (size_t i = 0; i < ad.size(); ++i) out->data[i] = fwd(ad[i], bd[i % bn]);
  check_finite(*out, name);
  Tensor y(out);
  connect(out, {a, b});
  if (out->requires_grad) {
    auto ai = a.impl();
    auto bi = b.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, ai, bi, bwd]() {
      const size_t bn = bi->data.size();
      const bool ga = ai->requires_grad;
      const bool gb = bi->requires_grad;
      if (ga) ai->ensure_grad();
      if (gb) bi->ensure_grad();
      for (size_t i = 0; i < self->data.size(); ++i) {
        double da, db;
        bwd(ai->data[i], bi->data[i % bn], self->grad[i], da, db);
        if (ga) ai->grad[i] += da;
        if (gb) bi->grad[i % bn] += db;
      }
    };
  }
  return y;
}

template <typename Fwd, typename Dfn>
Tensor unary_ew(const Tensor& a, const char* name, Fwd fwd, Dfn dfn) {
  auto out = make_impl(a.shape());
  const auto& ad = a.data();
  for (size_t i = 0; i < ad.size(); ++i) out->data[i] = fwd(ad[i]);
  check_finite(*out, name);
  Tensor y(out);
  connect(out, {a});
  if (out->requires_grad) {
    auto ai = a.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, ai, dfn]() {
      ai->ensure_grad();
      for (size_t i = 0; i < self->data.size(); ++i) {
        ai->grad[i] += dfn(ai->data[i], self->data[i]) * self->grad[i];
      }
    };
  }
  return y;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g / y;
        db = -g * x / (y * y);
      });
}

Tensor neg(const Tensor& a) {
  return unary_ew(a, "neg", [](double x) { return -x; },
                  [](double, double) { return -1.0; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_ew(a, "add_scalar", [c](double x) { return x + c; },
                  [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
  return unary_ew(a, "mul_scalar", [c](double x) { return x * c; },
                  [c](double, double) { return c; });
}

Tensor relu(const Tensor& a) {
  return unary_ew(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_ew(a, "sigmoid",
                  [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_op(const Tensor& a) {
  return unary_ew(a, "tanh", [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& a) {
  return unary_ew(
      a, "gelu",
      [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); },
      [](double x, double) {
        const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
        const double Phi = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
        return Phi + x * phi;
      });
}

Tensor exp_op(const Tensor& a) {
  return unary_ew(a, "exp", [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor log_op(const Tensor& a) {
  return unary_ew(a, "log", [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary_ew(a, "clamp",
                  [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
                  [lo, hi](double x, double) {
                    return (x > lo && x < hi) ? 1.0 : 0.0;
                  });
}

Tensor emin(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("emin: shape mismatch");
  return broadcast_binary(
      a, b, "emin", [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y, double g, double& da, double& db) {
        da = x <= y ? g : 0.0;
        db = x <= y ? 0.0 : g;
      });
}

Tensor emax(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("emax: shape mismatch");
  return broadcast_binary(
      a, b, "emax", [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y, double g, double& da, double& db) {
        da = x >= y ? g : 0.0;
        db = x >= y ? 0.0 : g;
      });
}

// ------------------------------------------------------------------- matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2) {
    throw std::invalid_argument("matmul: expects 2-D operands");
  }
  const int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) throw std::invalid_argument("matmul: inner extents disagree");
  auto out = make_impl({m, n});
  const double* A = a.data().data();
  const double* B = b.data().data();
  double* C = out->data.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B + p * n;
      double* crow = C + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  check_finite(*out, "matmul");
  Tensor y(out);
  connect(out, {a, b});
  if (out->requires_grad) {
    auto ai = a.impl();
    auto bi = b.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, ai, bi, m, k, n]() {
      const double* G = self->grad.data();
      if (ai->requires_grad) {
        ai->ensure_grad();
        // dA = G * B^T
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* grow = G + i * n;
            const double* brow = bi->data.data() + p * n;
            for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ai->grad[static_cast<size_t>(i * k + p)] += acc;
          }
        }
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        // dB = A^T * G
        for (int64_t p = 0; p < k; ++p) {
          for (int64_t i = 0; i < m; ++i) {
            const double av = ai->data[static_cast<size_t>(i * k + p)];
            if (av == 0.0) continue;
            const double* grow = G + i * n;
            double* brow = bi->grad.data() + p * n;
            for (int64_t j = 0; j < n; ++j) brow[j] += av * grow[j];
          }
        }
      }
    };
  }
  return y;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 3 || b.ndim() != 3) {
    throw std::invalid_argument("bmm: expects 3-D operands");
  }
  const int64_t B = a.dim(0), m = a.dim(1), k = a.dim(2);
  if (b.dim(0) != B || b.dim(1) != k) {
    throw std::invalid_argument("bmm: batch/inner extents disagree");
  }
  const int64_t n = b.dim(2);
  auto out = make_impl({B, m, n});
  for (int64_t bb = 0; bb < B; ++bb) {
    const double* A = a.data().data() + bb * m * k;
    const double* Bm = b.data().data() + bb * k * n;
    double* C = out->data.data() + bb * m * n;
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t p = 0; p < k; ++p) {
        const double av = A[i * k + p];
        if (av == 0.0) continue;
        const double* brow = Bm + p * n;
        double* crow = C + i * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  check_finite(*out, "bmm");
  Tensor y(out);
  connect(out, {a, b});
  if (out->requires_grad) {
    auto ai = a.impl();
    auto bi = b.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, ai, bi, B, m, k, n]() {
      for (int64_t bb = 0; bb < B; ++bb) {
        const double* G = self->grad.data() + bb * m * n;
        const double* A = ai->data.data() + bb * m * k;
        const double* Bm = bi->data.data() + bb * k * n;
        if (ai->requires_grad) {
          ai->ensure_grad();
          double* dA = ai->grad.data() + bb * m * k;
          for (int64_t i = 0; i < m; ++i) {
            for (int64_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (int64_t j = 0; j < n; ++j) acc += G[i * n + j] * Bm[p * n + j];
              dA[i * k + p] += acc;
            }
          }
        }
        if (bi->requires_grad) {
          bi->ensure_grad();
          double* dB = bi->grad.data() + bb * k * n;
          for (int64_t p = 0; p < k; ++p) {
            for (int64_t i = 0; i < m; ++i) {
              const double av = A[i * k + p];
              if (av == 0.0) continue;
              for (int64_t j = 0; j < n; ++j) dB[p * n + j] += av * G[i * n + j];
            }
          }
        }
      }
    };
  }
  return y;
}

// ------------------------------------------------------------------- conv2d

namespace {

Tensor conv2d_impl(const Tensor& x, const Tensor& w, const Tensor* bias,
                   int stride, int padding) {
  if (x.ndim() != 4 || w.ndim() != 4) {
    throw std::invalid_argument("conv2d: expects 4-D input and weight");
  }
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != C) throw std::invalid_argument("conv2d: channel mismatch");
  if (bias && (bias->ndim() != 1 || bias->dim(0) != O)) {
    throw std::invalid_argument("conv2d: bias shape mismatch");
  }
  const int64_t Ho = (H + 2 * padding - kh) / stride + 1;
  const int64_t Wo = (W + 2 * padding - kw) / stride + 1;
  if (H + 2 * padding < kh || W + 2 * padding < kw || Ho < 1 || Wo < 1) {
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  }
  auto out = make_impl({N, O, Ho, Wo});
  const double* X = x.data().data();
  const double* Wt = w.data().data();
  double* Y = out->data.data();
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t o = 0; o < O; ++o) {
      const double b = bias ? bias->data()[static_cast<size_t>(o)] : 0.0;
      for (int64_t oh = 0; oh < Ho; ++oh) {
        for (int64_t ow = 0; ow < Wo; ++ow) {
          double acc = b;
          for (int64_t c = 0; c < C; ++c) {
            for (int64_t i = 0; i < kh; ++i) {
              const int64_t ih = oh * stride - padding + i;
              if (ih < 0 || ih >= H) continue;
              const double* xrow = X + ((n * C + c) * H + ih) * W;
              const double* wrow = Wt + ((o * C + c) * kh + i) * kw;
              for (int64_t j = 0; j < kw; ++j) {
                const int64_t iw = ow * stride - padding + j;
                if (iw < 0 || iw >= W) continue;
                acc += xrow[iw] * wrow[j];
              }
            }
          }
          Y[((n * O + o) * Ho + oh) * Wo + ow] = acc;
        }
      }
    }
  }
  check_finite(*out, "conv2d");
  Tensor y(out);
  if (bias) {
    connect(out, {x, w, *bias});
  } else {
    connect(out, {x, w});
  }
  if (out->requires_grad) {
    auto xi = x.impl();
    auto wi = w.impl();
    std::shared_ptr<TensorImpl> bimpl = bias ? bias->impl() : nullptr;
    TensorImpl* self = out.get();
    out->vjp = [self, xi, wi, bimpl, N, C, H, W, O, kh, kw, Ho, Wo, stride,
                padding]() {
      const double* G = self->grad.data();
      const bool gx = xi->requires_grad;
      const bool gw = wi->requires_grad;
      const bool gb = bimpl && bimpl->requires_grad;
      if (gx) xi->ensure_grad();
      if (gw) wi->ensure_grad();
      if (gb) bimpl->ensure_grad();
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t o = 0; o < O; ++o) {
          for (int64_t oh = 0; oh < Ho; ++oh) {
            for (int64_t ow = 0; ow < Wo; ++ow) {
              const double g = G[((n * O + o) * Ho + oh) * Wo + ow];
              if (g == 0.0) continue;
              if (gb) bimpl->grad[static_cast<size_t>(o)] += g;
              for (int64_t c = 0; c < C; ++c) {
                for (int64_t i = 0; i < kh; ++i) {
                  const int64_t ih = oh * stride - padding + i;
                  if (ih < 0 || ih >= H) continue;
                  for (int64_t j = 0; j < kw; ++j) {
                    const int64_t iw = ow * stride - padding + j;
                    if (iw < 0 || iw >= W) continue;
                    const size_t xo =
                        static_cast<size_t>(((n * C + c) * H + ih) * W + iw);
                    const size_t wo =
                        static_cast<size_t>(((o * C + c) * kh + i) * kw + j);
                    if (gx) xi->grad[xo] += g * wi->data[wo];
                    if (gw) wi->grad[wo] += g * xi->data[xo];
                  }
                }
              }
            }
          }
        }
      }
    };
  }
  return y;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int padding) {
  return conv2d_impl(x, w, &bias, stride, padding);
}

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding) {
  return conv2d_impl(x, w, nullptr, stride, padding);
}

// ------------------------------------------------------------ normalization

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   std::vector<double>& running_mean,
                   std::vector<double>& running_var, bool train,
                   double momentum, double eps) {
  if (x.ndim() != 4) throw std::invalid_argument("batchnorm2d: expects 4-D input");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (gamma.numel() != C || beta.numel() != C ||
      static_cast<int64_t>(running_mean.size()) != C ||
      static_cast<int64_t>(running_var.size()) != C) {
    throw std::invalid_argument("batchnorm2d: channel extent mismatch");
  }
  const int64_t m = N * H * W;
  auto out = make_impl(x.shape());

  auto xhat = std::make_shared<std::vector<double>>(x.data().size());
  auto invstd = std::make_shared<std::vector<double>>(static_cast<size_t>(C));

  for (int64_t c = 0; c < C; ++c) {
    double mean, var;
    if (train) {
      double s = 0.0;
      for (int64_t n = 0; n < N; ++n)
        for (int64_t p = 0; p < H * W; ++p)
          s += x.data()[static_cast<size_t>((n * C + c) * H * W + p)];
      mean = s / static_cast<double>(m);
      double sv = 0.0;
      for (int64_t n = 0; n < N; ++n)
        for (int64_t p = 0; p < H * W; ++p) {
          const double d =
              x.data()[static_cast<size_t>((n * C + c) * H * W + p)] - mean;
          sv += d * d;
        }
      var = sv / static_cast<double>(m);  // biased, also used for running stats
      running_mean[static_cast<size_t>(c)] =
          (1.0 - momentum) * running_mean[static_cast<size_t>(c)] + momentum * mean;
      running_var[static_cast<size_t>(c)] =
          (1.0 - momentum) * running_var[static_cast<size_t>(c)] + momentum * var;
    } else {
      mean = running_mean[static_cast<size_t>(c)];
      var = running_var[static_cast<size_t>(c)];
    }
    const double is = 1.0 / std::sqrt(var + eps);
    (*invstd)[static_cast<size_t>(c)] = is;
    const double g = gamma.data()[static_cast<size_t>(c)];
    const double b = beta.data()[static_cast<size_t>(c)];
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t p = 0; p < H * W; ++p) {
        const size_t idx = static_cast<size_t>((n * C + c) * H * W + p);
        const double xh = (x.data()[idx] - mean) * is;
        (*xhat)[idx] = xh;
        out->data[idx] = g * xh + b;
      }
    }
  }
  check_finite(*out, "batchnorm2d");
  Tensor y(out);
  connect(out, {x, gamma, beta});
  if (out->requires_grad) {
    auto xi = x.impl();
    auto gi = gamma.impl();
    auto bi = beta.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, xi, gi, bi, xhat, invstd, N, C, H, W, m, train]() {
      if (gi->requires_grad) gi->ensure_grad();
      if (bi->requires_grad) bi->ensure_grad();
      if (xi->requires_grad) xi->ensure_grad();
      for (int64_t c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int64_t n = 0; n < N; ++n)
          for (int64_t p = 0; p < H * W; ++p) {
            const size_t idx = static_cast<size_t>((n * C + c) * H * W + p);
            sum_dy += self->grad[idx];
            sum_dy_xhat += self->grad[idx] * (*xhat)[idx];
          }
        if (gi->requires_grad) gi->grad[static_cast<size_t>(c)] += sum_dy_xhat;
        if (bi->requires_grad) bi->grad[static_cast<size_t>(c)] += sum_dy;
        if (xi->requires_grad) {
          const double g = gi->data[static_cast<size_t>(c)];
          const double is = (*invstd)[static_cast<size_t>(c)];
          for (int64_t n = 0; n < N; ++n) {
            for (int64_t p = 0; p < H * W; ++p) {
              const size_t idx = static_cast<size_t>((n * C + c) * H * W + p);
              if (train) {
                xi->grad[idx] +=
                    g * is *
                    (self->grad[idx] - sum_dy / static_cast<double>(m) -
                     (*xhat)[idx] * sum_dy_xhat / static_cast<double>(m));
              } else {
                xi->grad[idx] += g * is * self->grad[idx];
              }
            }
          }
        }
      }
    };
  }
  return y;
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps) {
  const int64_t C = x.shape().back();
  if (gamma.numel() != C || beta.numel() != C) {
    throw std::invalid_argument("layernorm: affine extent mismatch");
  }
  const int64_t rows = x.numel() / C;
  auto out = make_impl(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(x.data().size());
  auto invstd = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * C;
    double mean = 0.0;
    for (int64_t c = 0; c < C; ++c) mean += xr[c];
    mean /= static_cast<double>(C);
    double var = 0.0;
    for (int64_t c = 0; c < C; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<double>(C);
    const double is = 1.0 / std::sqrt(var + eps);
    (*invstd)[static_cast<size_t>(r)] = is;
    for (int64_t c = 0; c < C; ++c) {
      const size_t idx = static_cast<size_t>(r * C + c);
      const double xh = (xr[c] - mean) * is;
      (*xhat)[idx] = xh;
      out->data[idx] =
          gamma.data()[static_cast<size_t>(c)] * xh + beta.data()[static_cast<size_t>(c)];
    }
  }
  check_finite(*out, "layernorm");
  Tensor y(out);
  connect(out, {x, gamma, beta});
  if (out->requires_grad) {
    auto xi = x.impl();
    auto gi = gamma.impl();
    auto bi = beta.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, xi, gi, bi, xhat, invstd, rows, C]() {
      if (gi->requires_grad) gi->ensure_grad();
      if (bi->requires_grad) bi->ensure_grad();
      if (xi->requires_grad) xi->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int64_t c = 0; c < C; ++c) {
          const size_t idx = static_cast<size_t>(r * C + c);
          const double dxh = self->grad[idx] * gi->data[static_cast<size_t>(c)];
          sum_dy += dxh;
          sum_dy_xhat += dxh * (*xhat)[idx];
        }
        for (int64_t c = 0; c < C; ++c) {
          const size_t idx = static_cast<size_t>(r * C + c);
          if (gi->requires_grad)
            gi->grad[static_cast<size_t>(c)] += self->grad[idx] * (*xhat)[idx];
          if (bi->requires_grad) bi->grad[static_cast<size_t>(c)] += self->grad[idx];
          if (xi->requires_grad) {
            const double dxh = self->grad[idx] * gi->data[static_cast<size_t>(c)];
            xi->grad[idx] += (*invstd)[static_cast<size_t>(r)] *
                             (dxh - sum_dy / static_cast<double>(C) -
                              (*xhat)[idx] * sum_dy_xhat / static_cast<double>(C));
          }
        }
      }
    };
  }
  return y;
}

// ------------------------------------------------------------------ softmax

Tensor softmax_lastdim(const Tensor& a) {
  const int64_t C = a.shape().back();
  const int64_t rows = a.numel() / C;
  auto out = make_impl(a.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = a.data().data() + r * C;
    double mx = xr[0];
    for (int64_t c = 1; c < C; ++c) mx = std::max(mx, xr[c]);
    double z = 0.0;
    for (int64_t c = 0; c < C; ++c) z += std::exp(xr[c] - mx);
    for (int64_t c = 0; c < C; ++c) {
      out->data[static_cast<size_t>(r * C + c)] = std::exp(xr[c] - mx) / z;
    }
  }
  check_finite(*out, "softmax");
  Tensor y(out);
  connect(out, {a});
  if (out->requires_grad) {
    auto ai = a.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, ai, rows, C]() {
      ai->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (int64_t c = 0; c < C; ++c) {
          const size_t idx = static_cast<size_t>(r * C + c);
          dot += self->grad[idx] * self->data[idx];
        }
        for (int64_t c = 0; c < C; ++c) {
          const size_t idx = static_cast<size_t>(r * C + c);
          ai->grad[idx] += self->data[idx] * (self->grad[idx] - dot);
        }
      }
    };
  }
  return y;
}

Tensor softmax(const Tensor& a, int axis) {
  const int nd = a.ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) throw std::invalid_argument("softmax: bad axis");
  if (axis == nd - 1) return softmax_lastdim(a);
  std::vector<int> fwd_axes, inv_axes(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i)
    if (i != axis) fwd_axes.push_back(i);
  fwd_axes.push_back(axis);
  for (int i = 0; i < nd; ++i) inv_axes[static_cast<size_t>(fwd_axes[static_cast<size_t>(i)])] = i;
  return permute(softmax_lastdim(permute(a, fwd_axes)), inv_axes);
}

// --------------------------------------------------------------- reductions

Tensor sum_all(const Tensor& a) {
  auto out = make_impl({1});
  out->data[0] = std::accumulate(a.data().begin(), a.data().end(), 0.0);
  check_finite(*out, "sum");
  Tensor y(out);
  connect(out, {a});
  if (out->requires_grad) {
    auto ai = a.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, ai]() {
      ai->ensure_grad();
      const double g = self->grad[0];
      for (double& v : ai->grad) v += g;
    };
  }
  return y;
}

Tensor mean_all(const Tensor& a) {
  return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

// ------------------------------------------------------------------- layout

namespace {

void carry_spike(const std::shared_ptr<TensorImpl>& out,
                 std::initializer_list<Tensor> inputs) {
  for (const auto& t : inputs) {
    if (t.impl()->is_spike) {
      out->is_spike = true;
      out->spike_src = t.impl()->spike_src;
      return;
    }
  }
}

}  // namespace

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (numel_of(shape) != a.numel()) {
    throw std::invalid_argument("reshape: element count mismatch");
  }
  auto out = make_impl(shape);
  out->data = a.data();
  carry_spike(out, {a});
  Tensor y(out);
  connect(out, {a});
  if (out->requires_grad) {
    auto ai = a.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, ai]() {
      ai->ensure_grad();
      for (size_t i = 0; i < self->grad.size(); ++i) ai->grad[i] += self->grad[i];
    };
  }
  return y;
}

Tensor permute(const Tensor& a, const std::vector<int>& axes) {
  const int nd = a.ndim();
  if (static_cast<int>(axes.size()) != nd) {
    throw std::invalid_argument("permute: axes rank mismatch");
  }
  Shape new_shape(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i) new_shape[static_cast<size_t>(i)] = a.dim(axes[static_cast<size_t>(i)]);
  auto out = make_impl(new_shape);
  const auto in_st = strides_of(a.shape());
  const auto out_st = strides_of(new_shape);
  const int64_t n = a.numel();
  std::vector<int64_t> perm_in_strides(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i) {
    perm_in_strides[static_cast<size_t>(i)] = in_st[static_cast<size_t>(axes[static_cast<size_t>(i)])];
  }
  // Map output linear index -> input linear index.
  auto map_idx = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n));
  for (int64_t oi = 0; oi < n; ++oi) {
    int64_t rem = oi, ii = 0;
    for (int i = 0; i < nd; ++i) {
      const int64_t coord = rem / out_st[static_cast<size_t>(i)];
      rem %= out_st[static_cast<size_t>(i)];
      ii += coord * perm_in_strides[static_cast<size_t>(i)];
    }
    (*map_idx)[static_cast<size_t>(oi)] = ii;
    out->data[static_cast<size_t>(oi)] = a.data()[static_cast<size_t>(ii)];
  }
  carry_spike(out, {a});
  Tensor y(out);
  connect(out, {a});
  if (out->requires_grad) {
    auto ai = a.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, ai, map_idx]() {
      ai->ensure_grad();
      for (size_t oi = 0; oi < self->grad.size(); ++oi) {
        ai->grad[static_cast<size_t>((*map_idx)[oi])] += self->grad[oi];
      }
    };
  }
  return y;
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
  const int nd = a.ndim();
  if (b.ndim() != nd) throw std::invalid_argument("concat: rank mismatch");
  if (axis < 0) axis += nd;
  Shape out_shape = a.shape();
  for (int i = 0; i < nd; ++i) {
    if (i == axis) continue;
    if (a.dim(i) != b.dim(i)) throw std::invalid_argument("concat: shape mismatch");
  }
  out_shape[static_cast<size_t>(axis)] = a.dim(axis) + b.dim(axis);
  auto out = make_impl(out_shape);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= a.dim(i);
  for (int i = axis + 1; i < nd; ++i) inner *= a.dim(i);
  const int64_t ca = a.dim(axis), cb = b.dim(axis);
  for (int64_t o = 0; o < outer; ++o) {
    std::copy_n(a.data().data() + o * ca * inner, ca * inner,
                out->data.data() + o * (ca + cb) * inner);
    std::copy_n(b.data().data() + o * cb * inner, cb * inner,
                out->data.data() + o * (ca + cb) * inner + ca * inner);
  }
  carry_spike(out, {a, b});
  Tensor y(out);
  connect(out, {a, b});
  if (out->requires_grad) {
    auto ai = a.impl();
    auto bi = b.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, ai, bi, outer, inner, ca, cb]() {
      if (ai->requires_grad) ai->ensure_grad();
      if (bi->requires_grad) bi->ensure_grad();
      for (int64_t o = 0; o < outer; ++o) {
        const double* g = self->grad.data() + o * (ca + cb) * inner;
        if (ai->requires_grad) {
          double* ga = ai->grad.data() + o * ca * inner;
          for (int64_t i = 0; i < ca * inner; ++i) ga[i] += g[i];
        }
        if (bi->requires_grad) {
          double* gb = bi->grad.data() + o * cb * inner;
          for (int64_t i = 0; i < cb * inner; ++i) gb[i] += g[ca * inner + i];
        }
      }
    };
  }
  return y;
}

Tensor narrow(const Tensor& a, int axis, int64_t start, int64_t len) {
  const int nd = a.ndim();
  if (axis < 0) axis += nd;
  if (start < 0 || len < 1 || start + len > a.dim(axis)) {
    throw std::invalid_argument("narrow: range out of bounds");
  }
  Shape out_shape = a.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  auto out = make_impl(out_shape);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= a.dim(i);
  for (int i = axis + 1; i < nd; ++i) inner *= a.dim(i);
  const int64_t ca = a.dim(axis);
  for (int64_t o = 0; o < outer; ++o) {
    std::copy_n(a.data().data() + (o * ca + start) * inner, len * inner,
                out->data.data() + o * len * inner);
  }
  carry_spike(out, {a});
  Tensor y(out);
  connect(out, {a});
  if (out->requires_grad) {
    auto ai = a.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, ai, outer, inner, ca, start, len]() {
      ai->ensure_grad();
      for (int64_t o = 0; o < outer; ++o) {
        const double* g = self->grad.data() + o * len * inner;
        double* ga = ai->grad.data() + (o * ca + start) * inner;
        for (int64_t i = 0; i < len * inner; ++i) ga[i] += g[i];
      }
    };
  }
  return y;
}

Tensor pad_hw(const Tensor& x, int64_t new_h, int64_t new_w) {
  if (x.ndim() != 4) throw std::invalid_argument("pad_hw: expects 4-D input");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (new_h < H || new_w < W) throw std::invalid_argument("pad_hw: target smaller than input");
  auto out = make_impl({N, C, new_h, new_w});
  for (int64_t nc = 0; nc < N * C; ++nc) {
    for (int64_t h = 0; h < H; ++h) {
      std::copy_n(x.data().data() + (nc * H + h) * W, W,
                  out->data.data() + (nc * new_h + h) * new_w);
    }
  }
  carry_spike(out, {x});
  Tensor y(out);
  connect(out, {x});
  if (out->requires_grad) {
    auto xi = x.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, xi, N, C, H, W, new_h, new_w]() {
      xi->ensure_grad();
      for (int64_t nc = 0; nc < N * C; ++nc) {
        for (int64_t h = 0; h < H; ++h) {
          const double* g = self->grad.data() + (nc * new_h + h) * new_w;
          double* gx = xi->grad.data() + (nc * H + h) * W;
          for (int64_t w = 0; w < W; ++w) gx[w] += g[w];
        }
      }
    };
  }
  return y;
}

Tensor crop_hw(const Tensor& x, int64_t new_h, int64_t new_w) {
  if (x.ndim() != 4) throw std::invalid_argument("crop_hw: expects 4-D input");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (new_h > H || new_w > W) throw std::invalid_argument("crop_hw: target larger than input");
  auto out = make_impl({N, C, new_h, new_w});
  for (int64_t nc = 0; nc < N * C; ++nc) {
    for (int64_t h = 0; h < new_h; ++h) {
      std::copy_n(x.data().data() + (nc * H + h) * W, new_w,
                  out->data.data() + (nc * new_h + h) * new_w);
    }
  }
  carry_spike(out, {x});
  Tensor y(out);
  connect(out, {x});
  if (out->requires_grad) {
    auto xi = x.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, xi, N, C, H, W, new_h, new_w]() {
      xi->ensure_grad();
      for (int64_t nc = 0; nc < N * C; ++nc) {
        for (int64_t h = 0; h < new_h; ++h) {
          const double* g = self->grad.data() + (nc * new_h + h) * new_w;
          double* gx = xi->grad.data() + (nc * H + h) * W;
          for (int64_t w = 0; w < new_w; ++w) gx[w] += g[w];
        }
      }
    };
  }
  return y;
}

Tensor upsample2x(const Tensor& x) {
  if (x.ndim() != 4) throw std::invalid_argument("upsample2x: expects 4-D input");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  auto out = make_impl({N, C, 2 * H, 2 * W});
  for (int64_t nc = 0; nc < N * C; ++nc) {
    for (int64_t h = 0; h < 2 * H; ++h) {
      for (int64_t w = 0; w < 2 * W; ++w) {
        out->data[static_cast<size_t>((nc * 2 * H + h) * 2 * W + w)] =
            x.data()[static_cast<size_t>((nc * H + h / 2) * W + w / 2)];
      }
    }
  }
  Tensor y(out);
  connect(out, {x});
  if (out->requires_grad) {
    auto xi = x.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, xi, N, C, H, W]() {
      xi->ensure_grad();
      for (int64_t nc = 0; nc < N * C; ++nc) {
        for (int64_t h = 0; h < 2 * H; ++h) {
          for (int64_t w = 0; w < 2 * W; ++w) {
            xi->grad[static_cast<size_t>((nc * H + h / 2) * W + w / 2)] +=
                self->grad[static_cast<size_t>((nc * 2 * H + h) * 2 * W + w)];
          }
        }
      }
    };
  }
  return y;
}

Tensor gather_rows(const Tensor& x, const std::vector<CellIndex>& cells) {
  if (x.ndim() != 4) throw std::invalid_argument("gather_rows: expects 4-D input");
  const int64_t C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t K = static_cast<int64_t>(cells.size());
  if (K == 0) throw std::invalid_argument("gather_rows: empty index set");
  auto out = make_impl({K, C});
  for (int64_t k = 0; k < K; ++k) {
    const auto& ci = cells[static_cast<size_t>(k)];
    if (ci.n < 0 || ci.n >= x.dim(0) || ci.h < 0 || ci.h >= H || ci.w < 0 || ci.w >= W) {
      throw std::invalid_argument("gather_rows: index out of bounds");
    }
    for (int64_t c = 0; c < C; ++c) {
      out->data[static_cast<size_t>(k * C + c)] =
          x.data()[static_cast<size_t>(((ci.n * C + c) * H + ci.h) * W + ci.w)];
    }
  }
  carry_spike(out, {x});
  Tensor y(out);
  connect(out, {x});
  if (out->requires_grad) {
    auto xi = x.impl();
    auto idx = std::make_shared<std::vector<CellIndex>>(cells);
    TensorImpl* self = out.get();
    out->vjp = [self, xi, idx, C, H, W]() {
      xi->ensure_grad();
      for (size_t k = 0; k < idx->size(); ++k) {
        const auto& ci = (*idx)[k];
        for (int64_t c = 0; c < C; ++c) {
          xi->grad[static_cast<size_t>(((ci.n * C + c) * H + ci.h) * W + ci.w)] +=
              self->grad[k * static_cast<size_t>(C) + static_cast<size_t>(c)];
        }
      }
    };
  }
  return y;
}

// --------------------------------------------------------------------- loss

Tensor bce_with_logits(const Tensor& logits, const Tensor& target) {
  if (logits.shape() != target.shape()) {
    throw std::invalid_argument("bce_with_logits: shape mismatch");
  }
  auto out = make_impl(logits.shape());
  for (size_t i = 0; i < out->data.size(); ++i) {
    const double z = logits.data()[i];
    const double t = target.data()[i];
    out->data[i] = std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  check_finite(*out, "bce_with_logits");
  Tensor y(out);
  connect(out, {logits});
  if (out->requires_grad) {
    auto zi = logits.impl();
    auto ti = target.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, zi, ti]() {
      zi->ensure_grad();
      for (size_t i = 0; i < self->grad.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-zi->data[i]));
        zi->grad[i] += (s - ti->data[i]) * self->grad[i];
      }
    };
  }
  return y;
}

// ------------------------------------------------------------------ spiking

double surrogate_value(Surrogate kind, double alpha, double u) {
  if (kind == Surrogate::ATan) {
    return std::atan(kPi / 2.0 * alpha * u) / kPi + 0.5;
  }
  return 1.0 / (1.0 + std::exp(-alpha * u));
}

double surrogate_grad(Surrogate kind, double alpha, double u) {
  if (kind == Surrogate::ATan) {
    const double t = kPi / 2.0 * alpha * u;
    return alpha / (2.0 * (1.0 + t * t));
  }
  const double s = 1.0 / (1.0 + std::exp(-alpha * u));
  return alpha * s * (1.0 - s);
}

Tensor spike(const Tensor& u, Surrogate kind, double alpha, bool relaxed,
             int spike_src) {
  auto out = make_impl(u.shape());
  double spike_count = 0.0;
  for (size_t i = 0; i < out->data.size(); ++i) {
    if (relaxed) {
      out->data[i] = surrogate_value(kind, alpha, u.data()[i]);
    } else {
      out->data[i] = u.data()[i] >= 0.0 ? 1.0 : 0.0;
      spike_count += out->data[i];
    }
  }
  out->is_spike = true;
  out->spike_src = spike_src;
  if (!relaxed && costing::enabled()) {
    costing::record_spikes(spike_src, spike_count,
                           static_cast<double>(out->data.size()));
  }
  Tensor y(out);
  connect(out, {u});
  if (out->requires_grad) {
    auto ui = u.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, ui, kind, alpha]() {
      ui->ensure_grad();
      for (size_t i = 0; i < self->grad.size(); ++i) {
        ui->grad[i] += surrogate_grad(kind, alpha, ui->data[i]) * self->grad[i];
      }
    };
  }
  return y;
}

Tensor hard_reset(const Tensor& v_prime, const Tensor& s, double v_reset) {
  if (v_prime.shape() != s.shape()) {
    throw std::invalid_argument("hard_reset: shape mismatch");
  }
  auto out = make_impl(v_prime.shape());
  for (size_t i = 0; i < out->data.size(); ++i) {
    out->data[i] = s.data()[i] > 0.5 ? v_reset : v_prime.data()[i];
  }
  check_finite(*out, "hard_reset");
  Tensor y(out);
  connect(out, {v_prime, s});
  if (out->requires_grad) {
    auto vi = v_prime.impl();
    auto si = s.impl();
    TensorImpl* self = out.get();
    out->vjp = [self, vi, si, v_reset]() {
      if (vi->requires_grad) vi->ensure_grad();
      if (si->requires_grad) si->ensure_grad();
      for (size_t i = 0; i < self->grad.size(); ++i) {
        const double g = self->grad[i];
        if (vi->requires_grad) vi->grad[i] += (1.0 - si->data[i]) * g;
        if (si->requires_grad) si->grad[i] += -(vi->data[i] - v_reset) * g;
      }
    };
  }
  return y;
}

}  // namespace hsvt
