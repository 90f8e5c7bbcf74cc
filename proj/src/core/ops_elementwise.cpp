#include <algorithm>
#include <cmath>

#include "core/ops.hpp"
#include "core/ops_internal.hpp"
#include "core/parallel.hpp"

namespace lsen::ops {

namespace detail {

Shape broadcast_shapes(const char* op, const Shape& a, const Shape& b) {
  const size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (size_t i = 0; i < rank; ++i) {
    const int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1)
      throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                           " do not broadcast");
    out[i] = std::max(da, db);
  }
  return out;
}

std::vector<int64_t> broadcast_strides(const Shape& shape, const Shape& out) {
  std::vector<int64_t> strides(out.size(), 0);
  int64_t s = 1;
  for (size_t i = shape.size(); i-- > 0;) {
    const size_t oi = i + (out.size() - shape.size());
    strides[oi] = (shape[i] == 1 && out[oi] != 1) ? 0 : s;
    s *= shape[i];
  }
  return strides;
}

template <typename T>
void reduce_broadcast_grad(const T* dy, const Shape& from, T* acc, const Shape& to) {
  const int64_t n_from = numel(from);
  const int64_t n_to = numel(to);
  if (n_from == n_to) {  // same element count: identity layout
    for (int64_t i = 0; i < n_from; ++i) acc[i] += dy[i];
    return;
  }
  // Fast path: `to` matches the trailing dims of `from` exactly (leading-dim
  // reduction). This covers bias and position-table accumulation.
  bool trailing = to.size() <= from.size();
  if (trailing) {
    for (size_t i = 0; i < to.size(); ++i)
      if (to[to.size() - 1 - i] != from[from.size() - 1 - i]) {
        trailing = false;
        break;
      }
  }
  if (trailing) {
    const int64_t reps = n_from / n_to;
    for (int64_t r = 0; r < reps; ++r) {
      const T* src = dy + r * n_to;
      for (int64_t i = 0; i < n_to; ++i) acc[i] += src[i];
    }
    return;
  }
  // General case: walk every dy element, fold its index onto `to`.
  const auto strides = broadcast_strides(to, from);
  std::vector<int64_t> idx(from.size(), 0);
  for (int64_t lin = 0; lin < n_from; ++lin) {
    int64_t tgt = 0;
    for (size_t d = 0; d < from.size(); ++d) tgt += idx[d] * strides[d];
    acc[tgt] += dy[lin];
    for (size_t d = from.size(); d-- > 0;) {
      if (++idx[d] < from[d]) break;
      idx[d] = 0;
    }
  }
}

template void reduce_broadcast_grad<float>(const float*, const Shape&, float*, const Shape&);
template void reduce_broadcast_grad<double>(const double*, const Shape&, double*, const Shape&);

}  // namespace detail

namespace {

template <typename T, typename Fwd, typename Bwd>
Tensor<T> unary_op(const char* name, const Tensor<T>& x, Fwd fwd, Bwd dfdx_from_xy) {
  Tensor<T> y = Tensor<T>::zeros(x.shape());
  const T* in = x.data();
  T* out = y.data();
  const int64_t n = x.numel();
  parallel_for(n, [&](int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i) out[i] = fwd(in[i]);
  });
  detail::record(
      name, {x}, y, [x, y, dfdx_from_xy]() mutable {
        const T* in = x.data();
        const T* out = y.data();
        const T* dy = y.grad();
        T* dx = x.grad();
        const int64_t n = x.numel();
        for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * dfdx_from_xy(in[i], out[i]);
      });
  return y;
}

enum class BinOp { kAdd, kSub, kMul, kDiv };

template <typename T>
T apply(BinOp op, T a, T b) {
  switch (op) {
    case BinOp::kAdd: return a + b;
    case BinOp::kSub: return a - b;
    case BinOp::kMul: return a * b;
    case BinOp::kDiv: return a / b;
  }
  return T(0);
}

template <typename T>
Tensor<T> binary_op(const char* name, BinOp op, const Tensor<T>& a, const Tensor<T>& b) {
  const Shape out_shape = detail::broadcast_shapes(name, a.shape(), b.shape());
  Tensor<T> y = Tensor<T>::zeros(out_shape);
  const int64_t n = y.numel();
  const T* pa = a.data();
  const T* pb = b.data();
  T* py = y.data();

  if (a.shape() == out_shape && b.shape() == out_shape) {
    parallel_for(n, [&](int64_t lo, int64_t hi) {
      for (int64_t i = lo; i < hi; ++i) py[i] = apply(op, pa[i], pb[i]);
    });
  } else if (a.shape() == out_shape && b.numel() == 1) {
    const T bv = pb[0];
    parallel_for(n, [&](int64_t lo, int64_t hi) {
      for (int64_t i = lo; i < hi; ++i) py[i] = apply(op, pa[i], bv);
    });
  } else {
    const auto sa = detail::broadcast_strides(a.shape(), out_shape);
    const auto sb = detail::broadcast_strides(b.shape(), out_shape);
    std::vector<int64_t> idx(out_shape.size(), 0);
    int64_t ia = 0, ib = 0;
    std::vector<int64_t> back_a(out_shape.size()), back_b(out_shape.size());
    // Precompute index-advance deltas for a single-pass strided walk.
    for (size_t d = 0; d < out_shape.size(); ++d) {
      int64_t ra = sa[d], rb = sb[d];
      for (size_t k = d + 1; k < out_shape.size(); ++k) {
        ra -= sa[k] * (out_shape[k] - 1);
        rb -= sb[k] * (out_shape[k] - 1);
      }
      back_a[d] = ra;
      back_b[d] = rb;
    }
    for (int64_t lin = 0; lin < n; ++lin) {
      py[lin] = apply(op, pa[ia], pb[ib]);
      for (size_t d = out_shape.size(); d-- > 0;) {
        if (++idx[d] < out_shape[d]) {
          ia += back_a[d];
          ib += back_b[d];
          break;
        }
        idx[d] = 0;
      }
    }
  }

  detail::record(name, {a, b}, y, [name, op, a, b, y]() mutable {
    const int64_t n = y.numel();
    const T* dy = y.grad();
    const T* pa = a.data();
    const T* pb = b.data();
    auto accumulate = [&](const Tensor<T>& target, bool is_a) {
      std::vector<T> local;
      const T* contrib = nullptr;
      switch (op) {
        case BinOp::kAdd:
          contrib = dy;
          break;
        case BinOp::kSub:
          if (is_a) {
            contrib = dy;
          } else {
            local.resize(n);
            for (int64_t i = 0; i < n; ++i) local[i] = -dy[i];
            contrib = local.data();
          }
          break;
        case BinOp::kMul: {
          local.resize(n);
          const Tensor<T>& other = is_a ? b : a;
          const auto so = detail::broadcast_strides(other.shape(), y.shape());
          if (other.shape() == y.shape()) {
            const T* po = other.data();
            for (int64_t i = 0; i < n; ++i) local[i] = dy[i] * po[i];
          } else {
            const T* po = other.data();
            std::vector<int64_t> idx(y.shape().size(), 0);
            for (int64_t lin = 0; lin < n; ++lin) {
              int64_t io = 0;
              for (size_t d = 0; d < y.shape().size(); ++d) io += idx[d] * so[d];
              local[lin] = dy[lin] * po[io];
              for (size_t d = y.shape().size(); d-- > 0;) {
                if (++idx[d] < y.shape()[d]) break;
                idx[d] = 0;
              }
            }
          }
          contrib = local.data();
          break;
        }
        case BinOp::kDiv: {
          local.resize(n);
          const auto stra = detail::broadcast_strides(a.shape(), y.shape());
          const auto strb = detail::broadcast_strides(b.shape(), y.shape());
          std::vector<int64_t> idx(y.shape().size(), 0);
          for (int64_t lin = 0; lin < n; ++lin) {
            int64_t iav = 0, ibv = 0;
            for (size_t d = 0; d < y.shape().size(); ++d) {
              iav += idx[d] * stra[d];
              ibv += idx[d] * strb[d];
            }
            const T bv = pb[ibv];
            local[lin] = is_a ? dy[lin] / bv : -dy[lin] * pa[iav] / (bv * bv);
            for (size_t d = y.shape().size(); d-- > 0;) {
              if (++idx[d] < y.shape()[d]) break;
              idx[d] = 0;
            }
          }
          contrib = local.data();
          break;
        }
      }
      detail::reduce_broadcast_grad(contrib, y.shape(), target.storage()->grad.data(),
                                    target.shape());
    };
    (void)name;
    if (a.requires_grad()) accumulate(a, true);
    if (b.requires_grad()) accumulate(b, false);
  });
  return y;
}

}  // namespace

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_op(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); },
      [](T in, T) { return in > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_op(
      "sigmoid", x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
      [](T, T out) { return out * (T(1) - out); });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary_op(
      "log", x, [](T v) { return std::log(v); }, [](T in, T) { return T(1) / in; });
}

template <typename T>
Tensor<T> affine(const Tensor<T>& x, T a, T b) {
  return unary_op(
      "affine", x, [a, b](T v) { return a * v + b; }, [a](T, T) { return a; });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  LSEN_CHECK_ARG(lo <= hi, "clamp: lo > hi");
  return unary_op(
      "clamp", x, [lo, hi](T v) { return std::min(hi, std::max(lo, v)); },
      [lo, hi](T in, T) { return (in >= lo && in <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op("add", BinOp::kAdd, a, b);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op("sub", BinOp::kSub, a, b);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op("mul", BinOp::kMul, a, b);
}
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op("div", BinOp::kDiv, a, b);
}

#define LSEN_INSTANTIATE(T)                                    \
  template Tensor<T> relu<T>(const Tensor<T>&);                \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);             \
  template Tensor<T> log<T>(const Tensor<T>&);                 \
  template Tensor<T> affine<T>(const Tensor<T>&, T, T);        \
  template Tensor<T> clamp<T>(const Tensor<T>&, T, T);         \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> div<T>(const Tensor<T>&, const Tensor<T>&);

LSEN_INSTANTIATE(float)
LSEN_INSTANTIATE(double)
#undef LSEN_INSTANTIATE

}  // namespace lsen::ops
