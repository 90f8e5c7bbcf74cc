#include "core/blas.hpp"
#include "core/ops.hpp"
#include "core/ops_internal.hpp"
#include "core/parallel.hpp"

namespace lsen::ops {

namespace {

struct BatchView {
  Shape batch;           // broadcast batch dims
  int64_t count = 1;     // product of batch dims
  std::vector<int64_t> stride_a, stride_b;  // per batch dim, in matrices
};

// Resolves the flattened batch index into offsets (in units of one matrix).
int64_t offset_for(const std::vector<int64_t>& strides, const Shape& batch, int64_t flat) {
  int64_t off = 0;
  for (size_t d = batch.size(); d-- > 0;) {
    const int64_t i = flat % batch[d];
    flat /= batch[d];
    off = off + i * strides[d];
  }
  return off;
}

std::vector<int64_t> matrix_strides(const Shape& dims, const Shape& batch) {
  // dims: the tensor's own batch dims (right-aligned against `batch`)
  std::vector<int64_t> strides(batch.size(), 0);
  int64_t s = 1;
  for (size_t i = dims.size(); i-- > 0;) {
    const size_t bi = i + (batch.size() - dims.size());
    strides[bi] = (dims[i] == 1 && batch[bi] != 1) ? 0 : s;
    s *= dims[i];
  }
  return strides;
}

bool any_zero(const std::vector<int64_t>& v) {
  for (int64_t s : v)
    if (s == 0) return true;
  return false;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  LSEN_CHECK_DIM(a.rank() >= 2 && b.rank() >= 2, "matmul: inputs must have rank >= 2");
  const int64_t m = a.dim(a.rank() - 2);
  const int64_t ka = a.dim(a.rank() - 1);
  const int64_t kb = b.dim(b.rank() - 2);
  const int64_t n = b.dim(b.rank() - 1);
  LSEN_CHECK_DIM(ka == kb, "matmul: inner dims differ (" + std::to_string(ka) + " vs " +
                               std::to_string(kb) + ")");
  Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  BatchView bv;
  bv.batch = detail::broadcast_shapes("matmul", batch_a, batch_b);
  bv.count = numel(bv.batch);
  bv.stride_a = matrix_strides(batch_a, bv.batch);
  bv.stride_b = matrix_strides(batch_b, bv.batch);

  Shape out_shape = bv.batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor<T> y = Tensor<T>::zeros(out_shape);

  const T* pa = a.data();
  const T* pb = b.data();
  T* py = y.data();
  const int64_t asz = m * ka, bsz = ka * n, ysz = m * n;

  auto run_fwd = [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      const T* ai = pa + offset_for(bv.stride_a, bv.batch, i) * asz;
      const T* bi = pb + offset_for(bv.stride_b, bv.batch, i) * bsz;
      gemm(false, false, m, n, ka, T(1), ai, ka, bi, n, T(0), py + i * ysz, n);
    }
  };
  if (bv.count > 1)
    parallel_for(bv.count, run_fwd);
  else
    run_fwd(0, bv.count);

  detail::record("matmul", {a, b}, y, [a, b, y, bv, m, n, ka, asz, bsz, ysz]() mutable {
    const T* pa = a.data();
    const T* pb = b.data();
    const T* dy = y.grad();
    // dA = dY * B^T ; dB = A^T * dY, each reduced over broadcast batch dims.
    if (a.requires_grad()) {
      T* da = a.grad_vec().data();
      const bool bcast = any_zero(bv.stride_a);
      auto body = [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
          const T* bi = pb + offset_for(bv.stride_b, bv.batch, i) * bsz;
          T* dst = da + offset_for(bv.stride_a, bv.batch, i) * asz;
          gemm(false, true, m, ka, n, T(1), dy + i * ysz, n, bi, n, T(1), dst, ka);
        }
      };
      if (bcast || bv.count == 1)
        body(0, bv.count);  // serial: overlapping accumulation targets
      else
        parallel_for(bv.count, body);
    }
    if (b.requires_grad()) {
      T* db = b.grad_vec().data();
      const bool bcast = any_zero(bv.stride_b);
      auto body = [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
          const T* ai = pa + offset_for(bv.stride_a, bv.batch, i) * asz;
          T* dst = db + offset_for(bv.stride_b, bv.batch, i) * bsz;
          gemm(true, false, ka, n, m, T(1), ai, ka, dy + i * ysz, n, T(1), dst, n);
        }
      };
      if (bcast || bv.count == 1)
        body(0, bv.count);
      else
        parallel_for(bv.count, body);
    }
  });
  return y;
}

template Tensor<float> matmul<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul<double>(const Tensor<double>&, const Tensor<double>&);

}  // namespace lsen::ops
