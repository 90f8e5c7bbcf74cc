#pragma once

#include <functional>
#include <vector>

#include "core/tensor.hpp"

namespace lsen {

struct GradCheckOptions {
  double eps = 1e-5;
  // When positive, at most this many elements per parameter are probed
  // (deterministic stride sampling); 0 checks every element.
  int64_t max_elems_per_param = 0;
};

// Compares reverse-mode gradients of a scalar function against central finite
// differences and returns the maximum relative error over all probed
// elements. Relative error uses an absolute floor so that near-zero gradient
// pairs compare as equal: |a - n| / max(floor, |a| + |n|).
//
// `f` is re-evaluated after every perturbation and must be a pure function of
// `params` (plus constants). Only meaningful in double precision.
template <typename T>
double grad_check(const std::function<Tensor<T>()>& f, const std::vector<Tensor<T>>& params,
                  const GradCheckOptions& opts = {});

}  // namespace lsen
