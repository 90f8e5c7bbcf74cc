#pragma once

#include <vector>

#include "core/params.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "mff/mff.hpp"

namespace lsen {

// One decoder stage: 1x1 fusion of the upsampled and skip features followed
// by two 3x3 blocks, all at a constant channel width.
template <typename T>
struct CrdParams {
  ConvBlockParams<T> refine;  // 1x1, 2C -> C
  ConvBlockParams<T> conv_a, conv_b;  // 3x3, C -> C

  static CrdParams init(int channels, Rng& rng);
  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) const;
};

// Final projection to a single logit channel. The large variant is 11x11
// without bias; the plain variant (baseline decoder) is 1x1 with bias.
template <typename T>
struct OutConvParams {
  Tensor<T> kernel;  // [1, C, k, k]
  Tensor<T> bias;    // undefined for the no-bias large kernel

  static OutConvParams init_large(int channels, Rng& rng);  // 11x11, no bias
  static OutConvParams init_plain(int channels, Rng& rng);  // 1x1, bias
  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) const;
};

template <typename T>
Tensor<T> crd_stage(const Tensor<T>& x_up, const Tensor<T>& x_pie, const CrdParams<T>& params);

template <typename T>
Tensor<T> out_conv(const Tensor<T>& x, const OutConvParams<T>& params);

}  // namespace lsen
