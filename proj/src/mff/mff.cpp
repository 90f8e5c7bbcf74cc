#include "mff/mff.hpp"

#include "core/init.hpp"
#include "core/ops.hpp"

namespace lsen {

template <typename T>
ConvBlockParams<T> ConvBlockParams<T>::init(int cin, int cout, int k, Rng& rng) {
  LSEN_CHECK_ARG(cin >= 1 && cout >= 1 && k >= 1, "ConvBlockParams: bad dimensions");
  LSEN_CHECK_ARG(cout % 8 == 0,
                 "ConvBlockParams: output channels " + std::to_string(cout) +
                     " not divisible by 8 (GroupNorm uses 8 channels per group)");
  ConvBlockParams<T> p;
  p.kernel = Tensor<T>::zeros({cout, cin, k, k});
  he_uniform_fill(p.kernel, static_cast<int64_t>(cin) * k * k, rng);
  p.bias = Tensor<T>::zeros({cout});
  p.gn_gamma = Tensor<T>::full({cout}, T(1));
  p.gn_beta = Tensor<T>::zeros({cout});
  return p;
}

template <typename T>
Tensor<T> ConvBlockParams<T>::forward(const Tensor<T>& x) const {
  const int k = static_cast<int>(kernel.dim(2));
  Tensor<T> y = ops::conv2d(x, kernel, bias, 1, k / 2);
  y = ops::group_norm(y, groups(), gn_gamma, gn_beta, T(1e-5));
  return ops::relu(y);
}

template <typename T>
void ConvBlockParams<T>::collect(std::vector<ParamRef<T>>& out, const std::string& prefix) const {
  add_param(out, prefix + ".kernel", kernel);
  add_param(out, prefix + ".bias", bias);
  add_param(out, prefix + ".gn_gamma", gn_gamma, /*weight_decay=*/false);
  add_param(out, prefix + ".gn_beta", gn_beta, /*weight_decay=*/false);
}

template <typename T>
ChannelAttentionParams<T> ChannelAttentionParams<T>::init(int channels, int reduction, Rng& rng) {
  LSEN_CHECK_ARG(channels >= 1 && reduction >= 1, "ChannelAttentionParams: bad dimensions");
  const int64_t hidden = std::max(channels / reduction, 1);
  ChannelAttentionParams<T> p;
  p.w1 = Tensor<T>::zeros({channels, hidden});
  he_uniform_fill(p.w1, channels, rng);
  p.b1 = Tensor<T>::zeros({hidden});
  p.w2 = Tensor<T>::zeros({hidden, channels});  // zero start: gate = sigmoid(0)
  p.b2 = Tensor<T>::zeros({channels});
  return p;
}

template <typename T>
void ChannelAttentionParams<T>::collect(std::vector<ParamRef<T>>& out,
                                        const std::string& prefix) const {
  add_param(out, prefix + ".w1", w1);
  add_param(out, prefix + ".b1", b1);
  add_param(out, prefix + ".w2", w2);
  add_param(out, prefix + ".b2", b2);
}

template <typename T>
Tensor<T> channel_attention(const Tensor<T>& x, const ChannelAttentionParams<T>& params) {
  LSEN_CHECK_DIM(x.rank() == 4 && x.dim(1) == params.channels(),
                 "channel_attention: expected [B," + std::to_string(params.channels()) +
                     ",H,W], got " + shape_str(x.shape()));
  const int64_t b = x.dim(0), c = x.dim(1);
  Tensor<T> squeezed = ops::mean_lastdim(ops::reshape(x, {b, c, -1}));  // [B, C]
  Tensor<T> z = ops::relu(ops::add(ops::matmul(squeezed, params.w1), params.b1));
  Tensor<T> gate = ops::sigmoid(ops::add(ops::matmul(z, params.w2), params.b2));
  return ops::mul(x, ops::reshape(gate, {b, c, 1, 1}));
}

template <typename T>
MffParams<T> MffParams<T>::init(int raw_channels, int channels, bool has_down, Rng& rng) {
  MffParams<T> p;
  p.pre = ConvBlockParams<T>::init(raw_channels, channels, 3, rng);
  p.branch_1 = ConvBlockParams<T>::init(channels, channels, 1, rng);
  p.branch_3 = ConvBlockParams<T>::init(channels, channels, 3, rng);
  p.branch_5 = ConvBlockParams<T>::init(channels, channels, 5, rng);
  p.ca = ChannelAttentionParams<T>::init(3 * channels, kCaReduction, rng);
  p.fuse = ConvBlockParams<T>::init(has_down ? 4 * channels : 3 * channels, channels, 1, rng);
  p.out = ConvBlockParams<T>::init(channels, channels, 3, rng);
  p.has_down = has_down;
  return p;
}

template <typename T>
void MffParams<T>::collect(std::vector<ParamRef<T>>& out, const std::string& prefix) const {
  pre.collect(out, prefix + ".pre");
  branch_1.collect(out, prefix + ".branch1");
  branch_3.collect(out, prefix + ".branch3");
  branch_5.collect(out, prefix + ".branch5");
  ca.collect(out, prefix + ".ca");
  fuse.collect(out, prefix + ".fuse");
  this->out.collect(out, prefix + ".out");
}

template <typename T>
Tensor<T> mff_forward(const Tensor<T>& x_in, const Tensor<T>& x_down, const MffParams<T>& params) {
  LSEN_CHECK_DIM(x_in.rank() == 4, "mff_forward: x_in must be [B,C,H,W]");
  LSEN_CHECK_ARG(params.has_down == x_down.defined(),
                 params.has_down ? "mff_forward: stage expects x_down"
                                 : "mff_forward: stage takes no x_down");
  if (x_down.defined())
    LSEN_CHECK_DIM(x_down.dim(2) == x_in.dim(2) && x_down.dim(3) == x_in.dim(3),
                   "mff_forward: x_in " + shape_str(x_in.shape()) + " and x_down " +
                       shape_str(x_down.shape()) + " disagree on resolution");

  Tensor<T> pre = params.pre.forward(x_in);
  Tensor<T> multi = ops::concat<T>(
      {params.branch_1.forward(pre), params.branch_3.forward(pre), params.branch_5.forward(pre)},
      1);
  Tensor<T> att = channel_attention(multi, params.ca);
  Tensor<T> fused = x_down.defined() ? ops::concat<T>({att, x_down}, 1) : att;
  return params.out.forward(params.fuse.forward(fused));
}

#define LSEN_INSTANTIATE(T)                                        \
  template struct ConvBlockParams<T>;                              \
  template struct ChannelAttentionParams<T>;                       \
  template struct MffParams<T>;                                    \
  template Tensor<T> channel_attention<T>(const Tensor<T>&,        \
                                          const ChannelAttentionParams<T>&); \
  template Tensor<T> mff_forward<T>(const Tensor<T>&, const Tensor<T>&, const MffParams<T>&);

LSEN_INSTANTIATE(float)
LSEN_INSTANTIATE(double)
#undef LSEN_INSTANTIATE

}  // namespace lsen
