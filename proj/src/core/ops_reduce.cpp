#include "core/ops.hpp"
#include "core/ops_internal.hpp"
#include "core/parallel.hpp"

namespace lsen::ops {

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  // Blockwise accumulation in double keeps large f32 sums stable.
  double acc = 0.0;
  const T* in = x.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(in[i]);
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(acc));
  detail::record("sum_all", {x}, y, [x, y]() mutable {
    const T dy = y.grad()[0];
    T* dx = x.grad();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) dx[i] += dy;
  });
  return y;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  LSEN_CHECK_ARG(x.numel() > 0, "mean_all: empty tensor");
  double acc = 0.0;
  const T* in = x.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(in[i]);
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  detail::record("mean_all", {x}, y, [x, y]() mutable {
    const int64_t n = x.numel();
    const T dy = y.grad()[0] / static_cast<T>(n);
    T* dx = x.grad();
    for (int64_t i = 0; i < n; ++i) dx[i] += dy;
  });
  return y;
}

template <typename T>
Tensor<T> mean_lastdim(const Tensor<T>& x) {
  LSEN_CHECK_DIM(x.rank() >= 1, "mean_lastdim: rank 0 input");
  const int64_t last = x.dim(x.rank() - 1);
  LSEN_CHECK_ARG(last > 0, "mean_lastdim: empty last dim");
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  if (out_shape.empty()) out_shape = {1};
  Tensor<T> y = Tensor<T>::zeros(out_shape);
  const int64_t rows = y.numel();
  const T* in = x.data();
  T* out = y.data();
  parallel_for(rows, [&](int64_t r0, int64_t r1) {
    for (int64_t r = r0; r < r1; ++r) {
      double acc = 0.0;
      const T* src = in + r * last;
      for (int64_t j = 0; j < last; ++j) acc += static_cast<double>(src[j]);
      out[r] = static_cast<T>(acc / static_cast<double>(last));
    }
  });
  detail::record("mean_lastdim", {x}, y, [x, y, rows, last]() mutable {
    const T* dy = y.grad();
    T* dx = x.grad();
    const T inv = T(1) / static_cast<T>(last);
    for (int64_t r = 0; r < rows; ++r) {
      const T g = dy[r] * inv;
      T* dst = dx + r * last;
      for (int64_t j = 0; j < last; ++j) dst[j] += g;
    }
  });
  return y;
}

#define LSEN_INSTANTIATE(T)                                \
  template Tensor<T> sum_all<T>(const Tensor<T>&);         \
  template Tensor<T> mean_all<T>(const Tensor<T>&);        \
  template Tensor<T> mean_lastdim<T>(const Tensor<T>&);

LSEN_INSTANTIATE(float)
LSEN_INSTANTIATE(double)
#undef LSEN_INSTANTIATE

}  // namespace lsen::ops
