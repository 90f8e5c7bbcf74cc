#pragma once

#include <vector>

#include "core/params.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace lsen {

// Parameters of one patch-attention skip block: 5x5 query/key and 1x1 value
// projections, a learned P^2 x P^2 position table shared by the plain and
// shifted intra branches, and per-token linear maps for the inter branch.
template <typename T>
struct PieParams {
  Tensor<T> q_kernel, q_bias;  // [C,C,5,5], [C]
  Tensor<T> k_kernel, k_bias;
  Tensor<T> v_kernel, v_bias;  // [C,C,1,1], [C]
  Tensor<T> pos_table;         // [P^2, P^2], zero-initialized
  Tensor<T> inter_q_w, inter_q_b;  // [C,C], [C]
  Tensor<T> inter_k_w, inter_k_b;
  Tensor<T> inter_v_w, inter_v_b;
  int patch_size = 0;

  static PieParams init(int channels, int patch_size, Rng& rng);
  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) const;
  int channels() const { return static_cast<int>(q_kernel.dim(0)); }
};

// A feature map tiled into non-overlapping P x P patches, with the padding
// record needed to invert the tiling exactly.
template <typename T>
struct PatchGrid {
  Tensor<T> patches;  // [B*N, C, P^2]
  int64_t batch = 0, channels = 0;
  int64_t n_h = 0, n_w = 0;
  int64_t orig_h = 0, orig_w = 0;
  int pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;
  int patch_size = 0;

  int64_t count() const { return n_h * n_w; }
};

// shift=true first zero-pads by floor(P/2) on every side (the interleaved
// grid), then both modes pad up to divisibility (floor/ceil split) and tile.
template <typename T>
PatchGrid<T> partition_patches(const Tensor<T>& x, int patch_size, bool shift);

// Exact inverse of partition_patches for a grid with the same geometry.
template <typename T>
Tensor<T> merge_patches(const PatchGrid<T>& grid);

template <typename T>
Tensor<T> intra_patch_attention(const Tensor<T>& x, const PieParams<T>& params, bool shift);

template <typename T>
Tensor<T> inter_patch_attention(const Tensor<T>& x, const PieParams<T>& params);

// Full skip block: (intra + shifted intra)/2 + inter, ReLU, residual.
// When `heatmap` is given it receives the channel mean of the pre-residual
// activation as [B,1,H,W].
template <typename T>
Tensor<T> pie_forward(const Tensor<T>& x, const PieParams<T>& params,
                      Tensor<T>* heatmap = nullptr);

}  // namespace lsen
