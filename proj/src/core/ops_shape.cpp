#include <algorithm>
#include <cstring>
#include <numeric>

#include "core/ops.hpp"
#include "core/ops_internal.hpp"
#include "core/parallel.hpp"

namespace lsen::ops {

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape target) {
  // One dim may be -1 (inferred).
  int64_t known = 1;
  int infer = -1;
  for (size_t i = 0; i < target.size(); ++i) {
    if (target[i] == -1) {
      LSEN_CHECK_DIM(infer == -1, "reshape: more than one inferred dim");
      infer = static_cast<int>(i);
    } else {
      known *= target[i];
    }
  }
  if (infer >= 0) {
    LSEN_CHECK_DIM(known != 0 && x.numel() % known == 0,
                   "reshape: cannot infer dim for " + shape_str(x.shape()));
    target[static_cast<size_t>(infer)] = x.numel() / known;
  }
  LSEN_CHECK_DIM(numel(target) == x.numel(), "reshape: " + shape_str(x.shape()) + " -> " +
                                                 shape_str(target) + " changes element count");
  Tensor<T> y = Tensor<T>::from_data(std::move(target), x.vec());
  detail::record("reshape", {x}, y, [x, y]() mutable {
    const T* dy = y.grad();
    T* dx = x.grad();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) dx[i] += dy[i];
  });
  return y;
}

namespace {

// out[j] = in[perm_src(j)] for a permutation of axes.
template <typename T>
void permute_copy(const T* in, T* out, const Shape& in_shape, const std::vector<int>& axes) {
  const size_t rank = in_shape.size();
  Shape out_shape(rank);
  for (size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[static_cast<size_t>(axes[i])];

  std::vector<int64_t> in_strides(rank, 1);
  for (size_t i = rank - 1; i > 0; --i) in_strides[i - 1] = in_strides[i] * in_shape[i];
  // stride in the input for each output axis
  std::vector<int64_t> src_stride(rank);
  for (size_t i = 0; i < rank; ++i) src_stride[i] = in_strides[static_cast<size_t>(axes[i])];

  const int64_t n = numel(in_shape);
  const int64_t inner = out_shape[rank - 1];
  const int64_t outer = n / std::max<int64_t>(inner, 1);
  const int64_t inner_stride = src_stride[rank - 1];

  parallel_for(outer, [&](int64_t o0, int64_t o1) {
    std::vector<int64_t> idx(rank, 0);
    // decompose o0 into leading indices
    int64_t rem = o0;
    for (size_t d = rank - 1; d-- > 0;) {
      idx[d] = rem % out_shape[d];
      rem /= out_shape[d];
    }
    int64_t src_base = 0;
    for (size_t d = 0; d + 1 < rank; ++d) src_base += idx[d] * src_stride[d];
    for (int64_t o = o0; o < o1; ++o) {
      T* dst = out + o * inner;
      const T* src = in + src_base;
      if (inner_stride == 1) {
        std::memcpy(dst, src, sizeof(T) * static_cast<size_t>(inner));
      } else {
        for (int64_t j = 0; j < inner; ++j) dst[j] = src[j * inner_stride];
      }
      // advance leading odometer
      for (size_t d = rank - 1; d-- > 0;) {
        src_base += src_stride[d];
        if (++idx[d] < out_shape[d]) break;
        src_base -= src_stride[d] * out_shape[d];
        idx[d] = 0;
      }
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& axes) {
  const size_t rank = x.shape().size();
  LSEN_CHECK_DIM(axes.size() == rank, "permute: axes rank mismatch");
  std::vector<bool> seen(rank, false);
  for (int a : axes) {
    LSEN_CHECK_DIM(a >= 0 && static_cast<size_t>(a) < rank && !seen[static_cast<size_t>(a)],
                   "permute: invalid axis list");
    seen[static_cast<size_t>(a)] = true;
  }
  Shape out_shape(rank);
  for (size_t i = 0; i < rank; ++i) out_shape[i] = x.dim(axes[i]);
  Tensor<T> y = Tensor<T>::zeros(out_shape);
  if (rank == 0 || x.numel() == 0) return y;
  permute_copy(x.data(), y.data(), x.shape(), axes);

  std::vector<int> inverse(rank);
  for (size_t i = 0; i < rank; ++i) inverse[static_cast<size_t>(axes[i])] = static_cast<int>(i);
  detail::record("permute", {x}, y, [x, y, inverse]() mutable {
    // d(x) += permute(dy, inverse); accumulate via a scratch copy
    std::vector<T> scratch(static_cast<size_t>(x.numel()));
    permute_copy(y.grad(), scratch.data(), y.shape(), inverse);
    T* dx = x.grad();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) dx[i] += scratch[i];
  });
  return y;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  LSEN_CHECK_ARG(!parts.empty(), "concat: no inputs");
  const Shape& first = parts[0].shape();
  const size_t rank = first.size();
  LSEN_CHECK_DIM(axis >= 0 && static_cast<size_t>(axis) < rank, "concat: axis out of range");
  int64_t axis_total = 0;
  for (const auto& p : parts) {
    LSEN_CHECK_DIM(p.shape().size() == rank, "concat: rank mismatch");
    for (size_t d = 0; d < rank; ++d)
      LSEN_CHECK_DIM(d == static_cast<size_t>(axis) || p.dim(static_cast<int>(d)) == first[d],
                     "concat: shape mismatch at dim " + std::to_string(d));
    axis_total += p.dim(axis);
  }
  Shape out_shape = first;
  out_shape[static_cast<size_t>(axis)] = axis_total;
  Tensor<T> y = Tensor<T>::zeros(out_shape);

  int64_t outer = 1, inner = 1;
  for (size_t d = 0; d < static_cast<size_t>(axis); ++d) outer *= first[d];
  for (size_t d = static_cast<size_t>(axis) + 1; d < rank; ++d) inner *= first[d];

  int64_t offset = 0;
  std::vector<int64_t> spans;
  for (const auto& p : parts) {
    const int64_t span = p.dim(axis) * inner;
    spans.push_back(span);
    const T* src = p.data();
    T* dst = y.data() + offset;
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(dst + o * axis_total * inner, src + o * span,
                  sizeof(T) * static_cast<size_t>(span));
    offset += span;
  }

  std::vector<Tensor<T>> held = parts;
  Tensor<T> yh = y;
  detail::record("concat", std::vector<Tensor<T>>(parts), y,
                 [held, yh, spans, outer, inner, axis_total]() mutable {
                   const T* dy = yh.grad();
                   int64_t offset = 0;
                   for (size_t k = 0; k < held.size(); ++k) {
                     const int64_t span = spans[k];
                     if (held[k].requires_grad()) {
                       T* dx = held[k].grad_vec().data();
                       for (int64_t o = 0; o < outer; ++o) {
                         const T* src = dy + o * axis_total * inner + offset;
                         T* dst = dx + o * span;
                         for (int64_t i = 0; i < span; ++i) dst[i] += src[i];
                       }
                     }
                     offset += span;
                   }
                 });
  return y;
}

#define LSEN_INSTANTIATE(T)                                            \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);              \
  template Tensor<T> permute<T>(const Tensor<T>&, const std::vector<int>&); \
  template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, int);

LSEN_INSTANTIATE(float)
LSEN_INSTANTIATE(double)
#undef LSEN_INSTANTIATE

}  // namespace lsen::ops
