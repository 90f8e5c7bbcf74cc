#include <cstring>

#include "core/blas.hpp"
#include "core/ops.hpp"
#include "core/ops_internal.hpp"
#include "core/parallel.hpp"

namespace lsen::ops {

namespace {

struct ConvDims {
  int64_t batch, cin, h, w;
  int64_t cout, kh, kw;
  int stride, padding;
  int64_t oh, ow;
  int64_t cols;  // cin * kh * kw
};

ConvDims conv_dims(const Shape& x, const Shape& k, int stride, int padding) {
  LSEN_CHECK_DIM(x.size() == 4, "conv2d: input must be [B,C,H,W], got " + shape_str(x));
  LSEN_CHECK_DIM(k.size() == 4, "conv2d: kernel must be [Cout,Cin,kh,kw], got " + shape_str(k));
  LSEN_CHECK_ARG(stride >= 1, "conv2d: stride must be >= 1, got " + std::to_string(stride));
  LSEN_CHECK_ARG(padding >= 0, "conv2d: padding must be >= 0");
  LSEN_CHECK_DIM(x[1] == k[1], "conv2d: input channels " + std::to_string(x[1]) +
                                   " != kernel channels " + std::to_string(k[1]));
  ConvDims d;
  d.batch = x[0];
  d.cin = x[1];
  d.h = x[2];
  d.w = x[3];
  d.cout = k[0];
  d.kh = k[2];
  d.kw = k[3];
  d.stride = stride;
  d.padding = padding;
  LSEN_CHECK_ARG(d.h + 2 * padding >= d.kh && d.w + 2 * padding >= d.kw,
                 "conv2d: kernel larger than padded input");
  d.oh = (d.h + 2 * padding - d.kh) / stride + 1;
  d.ow = (d.w + 2 * padding - d.kw) / stride + 1;
  d.cols = d.cin * d.kh * d.kw;
  return d;
}

// Fills col[cols x npix] for output pixels [p0, p0+npix) of one image.
// Row r = (ci*kh + ky)*kw + kx; column j = output pixel p0 + j.
template <typename T>
void im2col_range(const T* img, const ConvDims& d, int64_t p0, int64_t npix, T* col) {
  parallel_for(d.cols, [&](int64_t r0, int64_t r1) {
    for (int64_t r = r0; r < r1; ++r) {
      const int64_t kx = r % d.kw;
      const int64_t ky = (r / d.kw) % d.kh;
      const int64_t ci = r / (d.kw * d.kh);
      const T* plane = img + ci * d.h * d.w;
      T* dst = col + (r - 0) * npix - p0;  // indexed by absolute pixel below
      for (int64_t p = p0; p < p0 + npix;) {
        const int64_t oy = p / d.ow;
        const int64_t ox0 = p % d.ow;
        const int64_t iy = oy * d.stride - d.padding + ky;
        const int64_t row_end = std::min(p0 + npix, (oy + 1) * d.ow);  // pixels on this output row
        if (iy < 0 || iy >= d.h) {
          for (int64_t p2 = p; p2 < row_end; ++p2) dst[p2] = T(0);
          p = row_end;
          continue;
        }
        const T* src_row = plane + iy * d.w;
        for (int64_t p2 = p, ox = ox0; p2 < row_end; ++p2, ++ox) {
          const int64_t ix = ox * d.stride - d.padding + kx;
          dst[p2] = (ix >= 0 && ix < d.w) ? src_row[ix] : T(0);
        }
        p = row_end;
      }
    }
  });
}

// Scatters col-gradient [cols x npix] back into the image gradient.
// Parallelized over input channels: every row of a channel writes only that
// channel's plane, so channel blocks are disjoint.
template <typename T>
void col2im_range(const T* col, const ConvDims& d, int64_t p0, int64_t npix, T* dimg) {
  parallel_for(d.cin, [&](int64_t c0, int64_t c1) {
    for (int64_t ci = c0; ci < c1; ++ci) {
      T* plane = dimg + ci * d.h * d.w;
      for (int64_t ky = 0; ky < d.kh; ++ky) {
        for (int64_t kx = 0; kx < d.kw; ++kx) {
          const int64_t r = (ci * d.kh + ky) * d.kw + kx;
          const T* src = col + r * npix - p0;
          for (int64_t p = p0; p < p0 + npix;) {
            const int64_t oy = p / d.ow;
            const int64_t ox0 = p % d.ow;
            const int64_t iy = oy * d.stride - d.padding + ky;
            const int64_t row_end = std::min(p0 + npix, (oy + 1) * d.ow);
            if (iy < 0 || iy >= d.h) {
              p = row_end;
              continue;
            }
            T* dst_row = plane + iy * d.w;
            for (int64_t p2 = p, ox = ox0; p2 < row_end; ++p2, ++ox) {
              const int64_t ix = ox * d.stride - d.padding + kx;
              if (ix >= 0 && ix < d.w) dst_row[ix] += src[p2];
            }
            p = row_end;
          }
        }
      }
    }
  });
}

int64_t chunk_pixels(const ConvDims& d) {
  // Keep the im2col buffer around 64 MB in float mode.
  const int64_t budget = int64_t(16) * 1024 * 1024;
  return std::max<int64_t>(d.ow, std::min(d.oh * d.ow, budget / std::max<int64_t>(d.cols, 1)));
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, int stride,
                 int padding) {
  const ConvDims d = conv_dims(x.shape(), kernel.shape(), stride, padding);
  if (bias.defined())
    LSEN_CHECK_DIM(bias.rank() == 1 && bias.dim(0) == d.cout,
                   "conv2d: bias must be [Cout], got " + shape_str(bias.shape()));

  Tensor<T> y = Tensor<T>::zeros({d.batch, d.cout, d.oh, d.ow});
  const int64_t opix = d.oh * d.ow;
  const int64_t chunk = chunk_pixels(d);
  std::vector<T> col(static_cast<size_t>(d.cols * chunk));

  const T* px = x.data();
  const T* pk = kernel.data();
  T* py = y.data();
  for (int64_t b = 0; b < d.batch; ++b) {
    for (int64_t p0 = 0; p0 < opix; p0 += chunk) {
      const int64_t npix = std::min(chunk, opix - p0);
      im2col_range(px + b * d.cin * d.h * d.w, d, p0, npix, col.data());
      // out[cout, p0:p0+npix] = K[cout, cols] * col
      gemm(false, false, d.cout, npix, d.cols, T(1), pk, d.cols, col.data(), npix, T(0),
           py + b * d.cout * opix + p0, opix);
    }
  }
  if (bias.defined()) {
    const T* pb = bias.data();
    parallel_for(d.batch * d.cout, [&](int64_t i0, int64_t i1) {
      for (int64_t i = i0; i < i1; ++i) {
        const T bv = pb[i % d.cout];
        T* dst = py + i * opix;
        for (int64_t p = 0; p < opix; ++p) dst[p] += bv;
      }
    });
  }

  std::vector<Tensor<T>> inputs{x, kernel};
  if (bias.defined()) inputs.push_back(bias);
  detail::record("conv2d", std::move(inputs), y, [x, kernel, bias, y, d]() mutable {
    const int64_t opix = d.oh * d.ow;
    const int64_t chunk = chunk_pixels(d);
    const T* dy = y.grad();
    const T* px = x.data();
    const T* pk = kernel.data();
    std::vector<T> col;
    if (x.requires_grad() || kernel.requires_grad())
      col.resize(static_cast<size_t>(d.cols * chunk));
    std::vector<T> dcol;
    if (x.requires_grad()) dcol.resize(static_cast<size_t>(d.cols * chunk));

    for (int64_t b = 0; b < d.batch; ++b) {
      const T* dy_b = dy + b * d.cout * opix;
      for (int64_t p0 = 0; p0 < opix; p0 += chunk) {
        const int64_t npix = std::min(chunk, opix - p0);
        if (kernel.requires_grad()) {
          im2col_range(px + b * d.cin * d.h * d.w, d, p0, npix, col.data());
          // dK += dY[:, p0:p1] * col^T
          gemm(false, true, d.cout, d.cols, npix, T(1), dy_b + p0, opix, col.data(), npix, T(1),
               kernel.grad_vec().data(), d.cols);
        }
        if (x.requires_grad()) {
          // dcol = K^T * dY[:, p0:p1]
          gemm(true, false, d.cols, npix, d.cout, T(1), pk, d.cols, dy_b + p0, opix, T(0),
               dcol.data(), npix);
          col2im_range(dcol.data(), d, p0, npix, x.grad_vec().data() + b * d.cin * d.h * d.w);
        }
      }
      if (bias.defined() && bias.requires_grad()) {
        T* db = bias.grad_vec().data();
        for (int64_t c = 0; c < d.cout; ++c) {
          double acc = 0.0;
          const T* src = dy_b + c * opix;
          for (int64_t p = 0; p < opix; ++p) acc += static_cast<double>(src[p]);
          db[c] += static_cast<T>(acc);
        }
      }
    }
  });
  return y;
}

template Tensor<float> conv2d<float>(const Tensor<float>&, const Tensor<float>&,
                                     const Tensor<float>&, int, int);
template Tensor<double> conv2d<double>(const Tensor<double>&, const Tensor<double>&,
                                       const Tensor<double>&, int, int);

}  // namespace lsen::ops
