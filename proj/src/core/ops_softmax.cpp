#include <algorithm>

#include "core/fastmath.hpp"
#include "core/ops.hpp"
#include "core/ops_internal.hpp"
#include "core/parallel.hpp"

namespace lsen::ops {

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
  LSEN_CHECK_DIM(x.rank() >= 1, "softmax_lastdim: rank 0 input");
  const int64_t l = x.dim(x.rank() - 1);
  LSEN_CHECK_ARG(l >= 1, "softmax_lastdim: empty last dim");
  const int64_t rows = x.numel() / l;
  Tensor<T> y = Tensor<T>::zeros(x.shape());
  const T* in = x.data();
  T* out = y.data();

  parallel_for(rows, [&](int64_t r0, int64_t r1) {
    for (int64_t r = r0; r < r1; ++r) {
      const T* src = in + r * l;
      T* dst = out + r * l;
      T mx = src[0];
      for (int64_t j = 1; j < l; ++j) mx = std::max(mx, src[j]);
      T sum = T(0);
      for (int64_t j = 0; j < l; ++j) {
        const T e = fast_exp(src[j] - mx);
        dst[j] = e;
        sum += e;
      }
      const T inv = T(1) / sum;
      for (int64_t j = 0; j < l; ++j) dst[j] *= inv;
    }
  });

  detail::record("softmax_lastdim", {x}, y, [x, y, rows, l]() mutable {
    const T* out = y.data();
    const T* dy = y.grad();
    T* dx = x.grad_vec().data();
    parallel_for(rows, [&](int64_t r0, int64_t r1) {
      for (int64_t r = r0; r < r1; ++r) {
        const T* yr = out + r * l;
        const T* dr = dy + r * l;
        T* xr = dx + r * l;
        T dot = T(0);
        for (int64_t j = 0; j < l; ++j) dot += yr[j] * dr[j];
        for (int64_t j = 0; j < l; ++j) xr[j] += yr[j] * (dr[j] - dot);
      }
    });
  });
  return y;
}

template Tensor<float> softmax_lastdim<float>(const Tensor<float>&);
template Tensor<double> softmax_lastdim<double>(const Tensor<double>&);

}  // namespace lsen::ops
