#include "crd/crd.hpp"

#include "core/init.hpp"
#include "core/ops.hpp"

namespace lsen {

template <typename T>
CrdParams<T> CrdParams<T>::init(int channels, Rng& rng) {
  CrdParams<T> p;
  p.refine = ConvBlockParams<T>::init(2 * channels, channels, 1, rng);
  p.conv_a = ConvBlockParams<T>::init(channels, channels, 3, rng);
  p.conv_b = ConvBlockParams<T>::init(channels, channels, 3, rng);
  return p;
}

template <typename T>
void CrdParams<T>::collect(std::vector<ParamRef<T>>& out, const std::string& prefix) const {
  refine.collect(out, prefix + ".refine");
  conv_a.collect(out, prefix + ".conv_a");
  conv_b.collect(out, prefix + ".conv_b");
}

template <typename T>
OutConvParams<T> OutConvParams<T>::init_large(int channels, Rng& rng) {
  OutConvParams<T> p;
  p.kernel = Tensor<T>::zeros({1, channels, 11, 11});
  he_uniform_fill(p.kernel, static_cast<int64_t>(channels) * 121, rng);
  return p;
}

template <typename T>
OutConvParams<T> OutConvParams<T>::init_plain(int channels, Rng& rng) {
  OutConvParams<T> p;
  p.kernel = Tensor<T>::zeros({1, channels, 1, 1});
  he_uniform_fill(p.kernel, channels, rng);
  p.bias = Tensor<T>::zeros({1});
  return p;
}

template <typename T>
void OutConvParams<T>::collect(std::vector<ParamRef<T>>& out, const std::string& prefix) const {
  add_param(out, prefix + ".kernel", kernel);
  if (bias.defined()) add_param(out, prefix + ".bias", bias);
}

template <typename T>
Tensor<T> crd_stage(const Tensor<T>& x_up, const Tensor<T>& x_pie, const CrdParams<T>& params) {
  LSEN_CHECK_DIM(x_up.shape() == x_pie.shape(),
                 "crd_stage: inputs disagree, " + shape_str(x_up.shape()) + " vs " +
                     shape_str(x_pie.shape()));
  Tensor<T> refined = params.refine.forward(ops::concat<T>({x_up, x_pie}, 1));
  return params.conv_b.forward(params.conv_a.forward(refined));
}

template <typename T>
Tensor<T> out_conv(const Tensor<T>& x, const OutConvParams<T>& params) {
  LSEN_CHECK_DIM(x.rank() == 4 && x.dim(1) == params.kernel.dim(1),
                 "out_conv: expected [B," + std::to_string(params.kernel.dim(1)) + ",H,W], got " +
                     shape_str(x.shape()));
  const int k = static_cast<int>(params.kernel.dim(2));
  return ops::conv2d(x, params.kernel, params.bias, 1, k / 2);
}

#define LSEN_INSTANTIATE(T)                                                        \
  template struct CrdParams<T>;                                                    \
  template struct OutConvParams<T>;                                                \
  template Tensor<T> crd_stage<T>(const Tensor<T>&, const Tensor<T>&, const CrdParams<T>&); \
  template Tensor<T> out_conv<T>(const Tensor<T>&, const OutConvParams<T>&);

LSEN_INSTANTIATE(float)
LSEN_INSTANTIATE(double)
#undef LSEN_INSTANTIATE

}  // namespace lsen
