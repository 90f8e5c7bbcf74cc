#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/params.hpp"
#include "core/tensor.hpp"
#include "crd/crd.hpp"
#include "mff/mff.hpp"
#include "pie/pie.hpp"

namespace lsen {

struct LsenetConfig {
  int layers = 4;
  int channels = 64;
  int patch_size = 15;
  int in_channels = 1;
  bool enable_mff = true;
  bool enable_pie = true;
  bool enable_crd = true;
  uint64_t seed = 0;

  void validate() const;
  int downsample_factor() const { return 1 << (layers - 1); }
  bool operator==(const LsenetConfig&) const = default;
};

// Fallback encoder stage (two 3x3 blocks) used when the multiscale stage is
// ablated, and fallback decoder stage used when the refinement decoder is.
template <typename T>
struct PlainStageParams {
  ConvBlockParams<T> conv_a, conv_b;

  static PlainStageParams init(int cin, int channels, Rng& rng);
  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) const;
  Tensor<T> forward(const Tensor<T>& x) const { return conv_b.forward(conv_a.forward(x)); }
};

template <typename T>
struct LsenetModel {
  LsenetConfig config;
  std::vector<MffParams<T>> mff;          // enable_mff
  std::vector<PlainStageParams<T>> enc;   // !enable_mff
  std::vector<PieParams<T>> pie;          // enable_pie
  std::vector<CrdParams<T>> crd;          // enable_crd, layers-1 stages
  std::vector<PlainStageParams<T>> dec;   // !enable_crd
  OutConvParams<T> out;                   // 11x11 no-bias, or 1x1+bias when !enable_crd

  // Ordered, uniquely named references to every trainable tensor.
  std::vector<ParamRef<T>> parameters() const;
  int64_t param_count() const;
};

template <typename T>
LsenetModel<T> build(const LsenetConfig& config);

// Strict forward: H and W must be divisible by 2^(layers-1).
// `heatmaps`, when given, receives one [B,1,H_l,W_l] attention map per layer.
template <typename T>
Tensor<T> forward(const LsenetModel<T>& model, const Tensor<T>& x,
                  std::vector<Tensor<T>>* heatmaps = nullptr);

// Inference-friendly forward: zero-pads to the next divisible size and crops
// the logits back.
template <typename T>
Tensor<T> forward_padded(const LsenetModel<T>& model, const Tensor<T>& x,
                         std::vector<Tensor<T>>* heatmaps = nullptr);

// ---- accounting ----

struct FlopCount {
  int64_t conv_macs = 0;     // convolution multiply-accumulates
  int64_t matmul_macs = 0;   // attention / linear multiply-accumulates
  int64_t elementwise = 0;   // activations, norms, pooling, resize, fusion

  // Documented convention: one MAC counts as two FLOPs (mul + add).
  int64_t flops() const { return 2 * (conv_macs + matmul_macs) + elementwise; }
};

FlopCount count_flops(const LsenetConfig& config, int64_t h, int64_t w);

struct ModuleParamCount {
  std::string name;
  int64_t params = 0;
};

template <typename T>
std::vector<ModuleParamCount> param_breakdown(const LsenetModel<T>& model);

}  // namespace lsen
