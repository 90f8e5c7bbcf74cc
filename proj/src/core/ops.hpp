#pragma once

#include <vector>

#include "core/tensor.hpp"

namespace lsen {

enum class PoolKind { kMax, kAvg };
enum class PadMode { kPadZero, kCrop };

namespace ops {

// ---- elementwise ----
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);
// a * x + b, scalar coefficients
template <typename T> Tensor<T> affine(const Tensor<T>& x, T a, T b);
template <typename T> Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

// ---- binary with numpy-style broadcasting ----
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

// ---- shape ----
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape target);
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& axes);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);

// ---- reductions ----
template <typename T> Tensor<T> sum_all(const Tensor<T>& x);
template <typename T> Tensor<T> mean_all(const Tensor<T>& x);
template <typename T> Tensor<T> mean_lastdim(const Tensor<T>& x);

// ---- linear algebra ----
// [..., M, K] x [..., K, N] -> [..., M, N]; leading dims broadcast.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// ---- neural-net primitives ----
// Cross-correlation, zero padding. kernel [Cout, Cin, kh, kw]; bias optional
// (pass a default-constructed Tensor for none).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, int stride,
                 int padding);

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, int groups, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps);

template <typename T> Tensor<T> softmax_lastdim(const Tensor<T>& x);

template <typename T> Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, int window, int stride);

template <typename T> Tensor<T> resize_bilinear(const Tensor<T>& x, int64_t out_h, int64_t out_w);

// Zero-pad / crop on the two trailing spatial dims of a [B,C,H,W] tensor.
template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, int top, int bottom, int left, int right);
template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, int top, int bottom, int left, int right);
template <typename T>
Tensor<T> pad_crop(const Tensor<T>& x, int top, int bottom, int left, int right, PadMode mode) {
  return mode == PadMode::kPadZero ? pad2d(x, top, bottom, left, right)
                                   : crop2d(x, top, bottom, left, right);
}

}  // namespace ops
}  // namespace lsen
