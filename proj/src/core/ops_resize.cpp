#include <algorithm>
#include <cmath>

#include "core/ops.hpp"
#include "core/ops_internal.hpp"
#include "core/parallel.hpp"

namespace lsen::ops {

namespace {

struct Axis {
  std::vector<int64_t> i0, i1;
  std::vector<double> w1;  // weight of i1; weight of i0 is 1-w1
};

// Half-pixel-center sampling (align_corners=false).
Axis make_axis(int64_t in, int64_t out) {
  Axis ax;
  ax.i0.resize(static_cast<size_t>(out));
  ax.i1.resize(static_cast<size_t>(out));
  ax.w1.resize(static_cast<size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t j = 0; j < out; ++j) {
    double src = (static_cast<double>(j) + 0.5) * scale - 0.5;
    src = std::max(0.0, std::min(src, static_cast<double>(in - 1)));
    const int64_t lo = static_cast<int64_t>(std::floor(src));
    ax.i0[j] = lo;
    ax.i1[j] = std::min(lo + 1, in - 1);
    ax.w1[j] = src - static_cast<double>(lo);
  }
  return ax;
}

}  // namespace

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int64_t out_h, int64_t out_w) {
  LSEN_CHECK_DIM(x.rank() == 4,
                 "resize_bilinear: input must be [B,C,H,W], got " + shape_str(x.shape()));
  LSEN_CHECK_ARG(out_h >= 1 && out_w >= 1, "resize_bilinear: target dims must be >= 1");
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  LSEN_CHECK_ARG(h >= 1 && w >= 1, "resize_bilinear: empty input");

  const Axis ay = make_axis(h, out_h);
  const Axis axx = make_axis(w, out_w);
  Tensor<T> y = Tensor<T>::zeros({b, c, out_h, out_w});
  const int64_t planes = b * c;
  const T* in = x.data();
  T* out = y.data();

  parallel_for(planes, [&](int64_t p0, int64_t p1) {
    for (int64_t p = p0; p < p1; ++p) {
      const T* plane = in + p * h * w;
      T* dst = out + p * out_h * out_w;
      for (int64_t oy = 0; oy < out_h; ++oy) {
        const int64_t y0 = ay.i0[oy], y1 = ay.i1[oy];
        const T wy1 = static_cast<T>(ay.w1[oy]);
        const T wy0 = T(1) - wy1;
        const T* row0 = plane + y0 * w;
        const T* row1 = plane + y1 * w;
        for (int64_t ox = 0; ox < out_w; ++ox) {
          const int64_t x0 = axx.i0[ox], x1 = axx.i1[ox];
          const T wx1 = static_cast<T>(axx.w1[ox]);
          const T wx0 = T(1) - wx1;
          dst[oy * out_w + ox] = wy0 * (wx0 * row0[x0] + wx1 * row0[x1]) +
                                 wy1 * (wx0 * row1[x0] + wx1 * row1[x1]);
        }
      }
    }
  });

  detail::record("resize_bilinear", {x}, y, [x, y, ay, axx, planes, h, w, out_h, out_w]() mutable {
    const T* dy = y.grad();
    T* dx = x.grad_vec().data();
    parallel_for(planes, [&](int64_t p0, int64_t p1) {
      for (int64_t p = p0; p < p1; ++p) {
        const T* src = dy + p * out_h * out_w;
        T* dplane = dx + p * h * w;
        for (int64_t oy = 0; oy < out_h; ++oy) {
          const int64_t y0 = ay.i0[oy], y1 = ay.i1[oy];
          const T wy1 = static_cast<T>(ay.w1[oy]);
          const T wy0 = T(1) - wy1;
          for (int64_t ox = 0; ox < out_w; ++ox) {
            const int64_t x0 = axx.i0[ox], x1 = axx.i1[ox];
            const T wx1 = static_cast<T>(axx.w1[ox]);
            const T wx0 = T(1) - wx1;
            const T g = src[oy * out_w + ox];
            dplane[y0 * w + x0] += wy0 * wx0 * g;
            dplane[y0 * w + x1] += wy0 * wx1 * g;
            dplane[y1 * w + x0] += wy1 * wx0 * g;
            dplane[y1 * w + x1] += wy1 * wx1 * g;
          }
        }
      }
    });
  });
  return y;
}

template Tensor<float> resize_bilinear<float>(const Tensor<float>&, int64_t, int64_t);
template Tensor<double> resize_bilinear<double>(const Tensor<double>&, int64_t, int64_t);

}  // namespace lsen::ops
