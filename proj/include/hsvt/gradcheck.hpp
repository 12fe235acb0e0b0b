#pragma once

#include <functional>
#include <vector>

#include "hsvt/tensor.hpp"

namespace hsvt {

// Central-difference gradient oracle: compares backward() gradients of the
// scalar-valued closure against (f(x+h)-f(x-h))/2h per input coordinate.
// Returns the max relative error, rel = |a-b| / max(1, |a|, |b|).
// The closure must be pure in its inputs (it is re-evaluated per coordinate).
double grad_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> inputs, double h = 1e-5);

// Same protocol but only a sampled subset of coordinates is probed, for
// larger models where full enumeration is too slow.
double grad_check_sampled(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> inputs, int samples_per_input, uint64_t seed,
    double h = 1e-5);

}  // namespace hsvt
