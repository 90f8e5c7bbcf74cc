#pragma once

#include <vector>

#include "core/params.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace lsen {

// Convolution -> GroupNorm (8 channels per group) -> ReLU.
template <typename T>
struct ConvBlockParams {
  Tensor<T> kernel;  // [Cout, Cin, k, k]
  Tensor<T> bias;    // [Cout]
  Tensor<T> gn_gamma, gn_beta;

  static ConvBlockParams init(int cin, int cout, int k, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) const;
  int64_t cout() const { return kernel.dim(0); }
  int groups() const { return static_cast<int>(kernel.dim(0)) / 8; }
};

// Squeeze/excite gate: global average -> C/r -> ReLU -> C -> sigmoid -> scale.
template <typename T>
struct ChannelAttentionParams {
  Tensor<T> w1, b1;  // [C, C/r], [C/r]
  Tensor<T> w2, b2;  // [C/r, C], [C]; zero-initialized (gate starts at 0.5)

  static ChannelAttentionParams init(int channels, int reduction, Rng& rng);
  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) const;
  int channels() const { return static_cast<int>(w1.dim(0)); }
};

template <typename T>
Tensor<T> channel_attention(const Tensor<T>& x, const ChannelAttentionParams<T>& params);

// One encoder stage: a 3x3 pre-block on the pooled raw input, parallel
// 1/3/5 blocks, channel attention over the 3C concat, fusion with the
// previous stage's downsampled features, and a 3x3 output block.
template <typename T>
struct MffParams {
  ConvBlockParams<T> pre;            // raw_in -> C, 3x3
  ConvBlockParams<T> branch_1, branch_3, branch_5;  // C -> C
  ChannelAttentionParams<T> ca;      // over 3C
  ConvBlockParams<T> fuse;           // 1x1: 3C+C -> C (3C -> C at layer 0)
  ConvBlockParams<T> out;            // 3x3: C -> C
  bool has_down = false;

  static MffParams init(int raw_channels, int channels, bool has_down, Rng& rng);
  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) const;
};

// x_down must be given exactly when the stage was built with has_down.
template <typename T>
Tensor<T> mff_forward(const Tensor<T>& x_in, const Tensor<T>& x_down, const MffParams<T>& params);

// Channel-attention reduction ratio (r); the squeeze width is max(C/r, 1).
inline constexpr int kCaReduction = 16;

}  // namespace lsen
