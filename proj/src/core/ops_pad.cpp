#include <cstring>

#include "core/ops.hpp"
#include "core/ops_internal.hpp"
#include "core/parallel.hpp"

namespace lsen::ops {

namespace {

void check_amounts(const char* op, int top, int bottom, int left, int right) {
  if (top < 0 || bottom < 0 || left < 0 || right < 0)
    throw ArgumentError(std::string(op) + ": negative amounts not allowed");
}

}  // namespace

template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, int top, int bottom, int left, int right) {
  check_amounts("pad2d", top, bottom, left, right);
  LSEN_CHECK_DIM(x.rank() == 4, "pad2d: input must be [B,C,H,W], got " + shape_str(x.shape()));
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t oh = h + top + bottom, ow = w + left + right;
  Tensor<T> y = Tensor<T>::zeros({b, c, oh, ow});
  const int64_t planes = b * c;
  const T* in = x.data();
  T* out = y.data();
  parallel_for(planes, [&](int64_t p0, int64_t p1) {
    for (int64_t p = p0; p < p1; ++p) {
      const T* src = in + p * h * w;
      T* dst = out + p * oh * ow + top * ow + left;
      for (int64_t r = 0; r < h; ++r)
        std::memcpy(dst + r * ow, src + r * w, sizeof(T) * static_cast<size_t>(w));
    }
  });
  detail::record("pad2d", {x}, y, [x, y, planes, h, w, oh, ow, top, left]() mutable {
    const T* dy = y.grad();
    T* dx = x.grad_vec().data();
    for (int64_t p = 0; p < planes; ++p) {
      const T* src = dy + p * oh * ow + top * ow + left;
      T* dst = dx + p * h * w;
      for (int64_t r = 0; r < h; ++r)
        for (int64_t j = 0; j < w; ++j) dst[r * w + j] += src[r * ow + j];
    }
  });
  return y;
}

template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, int top, int bottom, int left, int right) {
  check_amounts("crop2d", top, bottom, left, right);
  LSEN_CHECK_DIM(x.rank() == 4, "crop2d: input must be [B,C,H,W], got " + shape_str(x.shape()));
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  LSEN_CHECK_ARG(top + bottom < h && left + right < w, "crop2d: crop exceeds input size");
  const int64_t oh = h - top - bottom, ow = w - left - right;
  Tensor<T> y = Tensor<T>::zeros({b, c, oh, ow});
  const int64_t planes = b * c;
  const T* in = x.data();
  T* out = y.data();
  parallel_for(planes, [&](int64_t p0, int64_t p1) {
    for (int64_t p = p0; p < p1; ++p) {
      const T* src = in + p * h * w + top * w + left;
      T* dst = out + p * oh * ow;
      for (int64_t r = 0; r < oh; ++r)
        std::memcpy(dst + r * ow, src + r * w, sizeof(T) * static_cast<size_t>(ow));
    }
  });
  detail::record("crop2d", {x}, y, [x, y, planes, h, w, oh, ow, top, left]() mutable {
    const T* dy = y.grad();
    T* dx = x.grad_vec().data();
    for (int64_t p = 0; p < planes; ++p) {
      const T* src = dy + p * oh * ow;
      T* dst = dx + p * h * w + top * w + left;
      for (int64_t r = 0; r < oh; ++r)
        for (int64_t j = 0; j < ow; ++j) dst[r * w + j] += src[r * ow + j];
    }
  });
  return y;
}

#define LSEN_INSTANTIATE(T)                                          \
  template Tensor<T> pad2d<T>(const Tensor<T>&, int, int, int, int); \
  template Tensor<T> crop2d<T>(const Tensor<T>&, int, int, int, int);

LSEN_INSTANTIATE(float)
LSEN_INSTANTIATE(double)
#undef LSEN_INSTANTIATE

}  // namespace lsen::ops
