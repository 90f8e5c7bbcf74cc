#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace lsen {

// Named handle to one trainable tensor. `weight_decay` marks tensors the
// optimizer's decoupled decay applies to (norm affine and position tables
// are exempt).
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T> tensor;
  bool weight_decay = true;
};

template <typename T>
void add_param(std::vector<ParamRef<T>>& out, std::string name, const Tensor<T>& t,
               bool weight_decay = true) {
  t.set_requires_grad(true);
  out.push_back(ParamRef<T>{std::move(name), t, weight_decay});
}

}  // namespace lsen
