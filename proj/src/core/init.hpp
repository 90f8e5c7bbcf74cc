#pragma once

#include <cmath>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace lsen {

// He-uniform: U(-b, b) with b = sqrt(6 / fan_in).
template <typename T>
void he_uniform_fill(Tensor<T>& t, int64_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void fill(Tensor<T>& t, T value) {
  std::fill(t.vec().begin(), t.vec().end(), value);
}

template <typename T>
void uniform_fill(Tensor<T>& t, double lo, double hi, Rng& rng) {
  for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
void normal_fill(Tensor<T>& t, double mean, double stddev, Rng& rng) {
  for (auto& v : t.vec()) v = static_cast<T>(mean + stddev * rng.normal());
}

}  // namespace lsen
