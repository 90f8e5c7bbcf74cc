#include <algorithm>

#include "core/ops.hpp"
#include "core/ops_internal.hpp"
#include "core/parallel.hpp"

namespace lsen::ops {

template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, int window, int stride) {
  LSEN_CHECK_DIM(x.rank() == 4, "pool2d: input must be [B,C,H,W], got " + shape_str(x.shape()));
  LSEN_CHECK_ARG(window >= 1, "pool2d: window must be >= 1");
  LSEN_CHECK_ARG(stride >= 1, "pool2d: stride must be >= 1");
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (window == stride)
    LSEN_CHECK_ARG(h % stride == 0 && w % stride == 0,
                   "pool2d: spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                       " not divisible by window " + std::to_string(window));
  LSEN_CHECK_ARG(h >= window && w >= window, "pool2d: window larger than input");
  const int64_t oh = (h - window) / stride + 1;
  const int64_t ow = (w - window) / stride + 1;

  Tensor<T> y = Tensor<T>::zeros({b, c, oh, ow});
  const int64_t planes = b * c;
  const T* in = x.data();
  T* out = y.data();
  std::vector<int32_t> argmax;
  const bool track = kind == PoolKind::kMax && Tape<T>::current() && x.requires_grad();
  if (track) argmax.assign(static_cast<size_t>(y.numel()), 0);

  parallel_for(planes, [&](int64_t p0, int64_t p1) {
    for (int64_t p = p0; p < p1; ++p) {
      const T* plane = in + p * h * w;
      T* dst = out + p * oh * ow;
      int32_t* am = track ? argmax.data() + p * oh * ow : nullptr;
      for (int64_t oy = 0; oy < oh; ++oy) {
        for (int64_t ox = 0; ox < ow; ++ox) {
          const int64_t iy0 = oy * stride, ix0 = ox * stride;
          if (kind == PoolKind::kAvg) {
            double acc = 0.0;
            for (int64_t ky = 0; ky < window; ++ky)
              for (int64_t kx = 0; kx < window; ++kx)
                acc += static_cast<double>(plane[(iy0 + ky) * w + ix0 + kx]);
            dst[oy * ow + ox] = static_cast<T>(acc / (window * window));
          } else {
            T best = plane[iy0 * w + ix0];
            int32_t best_idx = static_cast<int32_t>(iy0 * w + ix0);
            for (int64_t ky = 0; ky < window; ++ky)
              for (int64_t kx = 0; kx < window; ++kx) {
                const int64_t idx = (iy0 + ky) * w + ix0 + kx;
                if (plane[idx] > best) {  // first maximum wins ties
                  best = plane[idx];
                  best_idx = static_cast<int32_t>(idx);
                }
              }
            dst[oy * ow + ox] = best;
            if (am) am[oy * ow + ox] = best_idx;
          }
        }
      }
    }
  });

  const int64_t win2 = static_cast<int64_t>(window) * window;
  detail::record("pool2d", {x}, y,
                 [x, y, kind, argmax = std::move(argmax), planes, oh, ow, h, w, window, stride,
                  win2]() mutable {
                   const T* dy = y.grad();
                   T* dx = x.grad_vec().data();
                   parallel_for(planes, [&](int64_t p0, int64_t p1) {
                     for (int64_t p = p0; p < p1; ++p) {
                       const T* dsrc = dy + p * oh * ow;
                       T* dplane = dx + p * h * w;
                       if (kind == PoolKind::kAvg) {
                         const T inv = T(1) / static_cast<T>(win2);
                         for (int64_t oy = 0; oy < oh; ++oy)
                           for (int64_t ox = 0; ox < ow; ++ox) {
                             const T g = dsrc[oy * ow + ox] * inv;
                             for (int64_t ky = 0; ky < window; ++ky)
                               for (int64_t kx = 0; kx < window; ++kx)
                                 dplane[(oy * stride + ky) * w + ox * stride + kx] += g;
                           }
                       } else {
                         const int32_t* am = argmax.data() + p * oh * ow;
                         for (int64_t i = 0; i < oh * ow; ++i) dplane[am[i]] += dsrc[i];
                       }
                     }
                   });
                 });
  return y;
}

template Tensor<float> pool2d<float>(const Tensor<float>&, PoolKind, int, int);
template Tensor<double> pool2d<double>(const Tensor<double>&, PoolKind, int, int);

}  // namespace lsen::ops
