#pragma once

#include <functional>
#include <initializer_list>
#include <vector>

#include "core/tensor.hpp"

namespace lsen::ops::detail {

// Appends a tape node when recording is active and any input carries grad.
template <typename T>
void record(const char* op, std::vector<Tensor<T>> inputs, Tensor<T>& out,
            std::function<void()> backward) {
  check_finite(op, out);
  Tape<T>* tape = Tape<T>::current();
  if (!tape) return;
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (!any) return;
  out.set_requires_grad(true);
  tape->record(op, std::move(inputs), out, std::move(backward));
}

template <typename T>
void record(const char* op, std::initializer_list<Tensor<T>> inputs, Tensor<T>& out,
            std::function<void()> backward) {
  record(op, std::vector<Tensor<T>>(inputs), out, std::move(backward));
}

// Right-aligned broadcast of two shapes; throws DimensionError on mismatch.
Shape broadcast_shapes(const char* op, const Shape& a, const Shape& b);

// Strides of `shape` expanded to `out` rank, with 0 stride on broadcast dims.
std::vector<int64_t> broadcast_strides(const Shape& shape, const Shape& out);

// grad reduction: sums `dy` (shape `from`) into `acc` (shape `to`, preallocated,
// accumulated += ). `to` broadcasts to `from`.
template <typename T>
void reduce_broadcast_grad(const T* dy, const Shape& from, T* acc, const Shape& to);

}  // namespace lsen::ops::detail
