#include "hsvt/gradcheck.hpp"

#include <cmath>
#include <random>

namespace hsvt {

namespace {

double check_coords(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                    std::vector<Tensor>& inputs,
                    const std::vector<std::vector<size_t>>& coords, double h) {
  for (auto& t : inputs) t.set_requires_grad(true);
  zero_grad(inputs);
  Tensor loss = f(inputs);
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& t : inputs) analytic.push_back(t.grad());

  double max_rel = 0.0;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& data = inputs[ti].data();
    for (size_t ci : coords[ti]) {
      const double orig = data[ci];
      data[ci] = orig + h;
      const double fp = f(inputs).item();
      data[ci] = orig - h;
      const double fm = f(inputs).item();
      data[ci] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double a = analytic[ti][ci];
      const double rel = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> inputs, double h) {
  std::vector<std::vector<size_t>> coords(inputs.size());
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    coords[ti].resize(inputs[ti].data().size());
    for (size_t i = 0; i < coords[ti].size(); ++i) coords[ti][i] = i;
  }
  return check_coords(f, inputs, coords, h);
}

double grad_check_sampled(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> inputs, int samples_per_input, uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<size_t>> coords(inputs.size());
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    const size_t n = inputs[ti].data().size();
    const size_t take = std::min<size_t>(n, static_cast<size_t>(samples_per_input));
    std::vector<size_t> all(n);
    for (size_t i = 0; i < n; ++i) all[i] = i;
    for (size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<size_t> d(i, n - 1);
      std::swap(all[i], all[d(rng)]);
      coords[ti].push_back(all[i]);
    }
  }
  return check_coords(f, inputs, coords, h);
}

}  // namespace hsvt
