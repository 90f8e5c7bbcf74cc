#include <cmath>

#include "core/ops.hpp"
#include "core/ops_internal.hpp"
#include "core/parallel.hpp"

namespace lsen::ops {

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, int groups, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps) {
  LSEN_CHECK_DIM(x.rank() == 4, "group_norm: input must be [B,C,H,W], got " + shape_str(x.shape()));
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  LSEN_CHECK_ARG(groups >= 1 && c % groups == 0,
                 "group_norm: channels " + std::to_string(c) + " not divisible by groups " +
                     std::to_string(groups));
  LSEN_CHECK_ARG(eps > T(0), "group_norm: eps must be positive");
  LSEN_CHECK_DIM(gamma.rank() == 1 && gamma.dim(0) == c && beta.rank() == 1 && beta.dim(0) == c,
                 "group_norm: gamma/beta must be [C]");

  const int64_t cpg = c / groups;          // channels per group
  const int64_t gsize = cpg * h * w;       // elements per (batch, group)
  const int64_t ngroups = b * groups;

  Tensor<T> y = Tensor<T>::zeros(x.shape());
  std::vector<T> mean(static_cast<size_t>(ngroups)), rstd(static_cast<size_t>(ngroups));
  const T* px = x.data();
  const T* pg = gamma.data();
  const T* pb = beta.data();
  T* py = y.data();

  parallel_for(ngroups, [&](int64_t g0, int64_t g1) {
    for (int64_t g = g0; g < g1; ++g) {
      const T* src = px + g * gsize;
      double sum = 0.0, sq = 0.0;
      for (int64_t i = 0; i < gsize; ++i) {
        const double v = static_cast<double>(src[i]);
        sum += v;
        sq += v * v;
      }
      const double mu = sum / static_cast<double>(gsize);
      const double var = std::max(0.0, sq / static_cast<double>(gsize) - mu * mu);
      const T m = static_cast<T>(mu);
      const T rs = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      mean[static_cast<size_t>(g)] = m;
      rstd[static_cast<size_t>(g)] = rs;
      const int64_t c0 = (g % groups) * cpg;
      T* dst = py + g * gsize;
      for (int64_t cc = 0; cc < cpg; ++cc) {
        const T ga = pg[c0 + cc];
        const T be = pb[c0 + cc];
        const T* s = src + cc * h * w;
        T* o = dst + cc * h * w;
        for (int64_t i = 0; i < h * w; ++i) o[i] = (s[i] - m) * rs * ga + be;
      }
    }
  });

  detail::record("group_norm", {x, gamma, beta}, y,
                 [x, gamma, beta, y, mean, rstd, groups, cpg, gsize, b, c, h, w]() mutable {
                   const int64_t hw = h * w;
                   const int64_t ngroups = b * groups;
                   const T* px = x.data();
                   const T* pg = gamma.data();
                   const T* dy = y.grad();
                   // dgamma/dbeta: per-channel sums over batch and space.
                   if (gamma.requires_grad() || beta.requires_grad()) {
                     T* dga = gamma.requires_grad() ? gamma.grad_vec().data() : nullptr;
                     T* dbe = beta.requires_grad() ? beta.grad_vec().data() : nullptr;
                     for (int64_t bi = 0; bi < b; ++bi) {
                       for (int64_t cc = 0; cc < c; ++cc) {
                         const int64_t g = bi * groups + cc / cpg;
                         const T m = mean[static_cast<size_t>(g)];
                         const T rs = rstd[static_cast<size_t>(g)];
                         const T* xs = px + (bi * c + cc) * hw;
                         const T* ds = dy + (bi * c + cc) * hw;
                         double sg = 0.0, sb = 0.0;
                         for (int64_t i = 0; i < hw; ++i) {
                           sg += static_cast<double>(ds[i]) * (xs[i] - m) * rs;
                           sb += static_cast<double>(ds[i]);
                         }
                         if (dga) dga[cc] += static_cast<T>(sg);
                         if (dbe) dbe[cc] += static_cast<T>(sb);
                       }
                     }
                   }
                   if (x.requires_grad()) {
                     T* dx = x.grad_vec().data();
                     parallel_for(ngroups, [&](int64_t g0, int64_t g1) {
                       for (int64_t g = g0; g < g1; ++g) {
                         const T m = mean[static_cast<size_t>(g)];
                         const T rs = rstd[static_cast<size_t>(g)];
                         const int64_t c0 = (g % groups) * cpg;
                         const T* xs = px + g * gsize;
                         const T* ds = dy + g * gsize;
                         // s1 = mean(gamma*dy), s2 = mean(gamma*dy*xhat)
                         double s1 = 0.0, s2 = 0.0;
                         for (int64_t cc = 0; cc < cpg; ++cc) {
                           const T ga = pg[c0 + cc];
                           const T* xr = xs + cc * hw;
                           const T* dr = ds + cc * hw;
                           for (int64_t i = 0; i < hw; ++i) {
                             const double gdy = static_cast<double>(ga) * dr[i];
                             s1 += gdy;
                             s2 += gdy * ((xr[i] - m) * rs);
                           }
                         }
                         s1 /= static_cast<double>(gsize);
                         s2 /= static_cast<double>(gsize);
                         T* dxg = dx + g * gsize;
                         for (int64_t cc = 0; cc < cpg; ++cc) {
                           const T ga = pg[c0 + cc];
                           const T* xr = xs + cc * hw;
                           const T* dr = ds + cc * hw;
                           T* dd = dxg + cc * hw;
                           for (int64_t i = 0; i < hw; ++i) {
                             const T xhat = (xr[i] - m) * rs;
                             dd[i] += rs * (ga * dr[i] - static_cast<T>(s1) -
                                            xhat * static_cast<T>(s2));
                           }
                         }
                       }
                     });
                   }
                 });
  return y;
}

template Tensor<float> group_norm<float>(const Tensor<float>&, int, const Tensor<float>&,
                                         const Tensor<float>&, float);
template Tensor<double> group_norm<double>(const Tensor<double>&, int, const Tensor<double>&,
                                           const Tensor<double>&, double);

}  // namespace lsen::ops
