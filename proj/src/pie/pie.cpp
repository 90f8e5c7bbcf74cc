#include "pie/pie.hpp"

#include <cmath>

#include "core/init.hpp"
#include "core/ops.hpp"

namespace lsen {

template <typename T>
PieParams<T> PieParams<T>::init(int channels, int patch_size, Rng& rng) {
  LSEN_CHECK_ARG(channels >= 1, "PieParams: channels must be >= 1");
  LSEN_CHECK_ARG(patch_size >= 2, "PieParams: patch size must be >= 2");
  const int64_t c = channels;
  const int64_t p2 = static_cast<int64_t>(patch_size) * patch_size;
  PieParams<T> p;
  p.patch_size = patch_size;
  p.q_kernel = Tensor<T>::zeros({c, c, 5, 5});
  he_uniform_fill(p.q_kernel, c * 25, rng);
  p.q_bias = Tensor<T>::zeros({c});
  p.k_kernel = Tensor<T>::zeros({c, c, 5, 5});
  he_uniform_fill(p.k_kernel, c * 25, rng);
  p.k_bias = Tensor<T>::zeros({c});
  p.v_kernel = Tensor<T>::zeros({c, c, 1, 1});
  he_uniform_fill(p.v_kernel, c, rng);
  p.v_bias = Tensor<T>::zeros({c});
  p.pos_table = Tensor<T>::zeros({p2, p2});  // zero start keeps attention unbiased
  p.inter_q_w = Tensor<T>::zeros({c, c});
  he_uniform_fill(p.inter_q_w, c, rng);
  p.inter_q_b = Tensor<T>::zeros({c});
  p.inter_k_w = Tensor<T>::zeros({c, c});
  he_uniform_fill(p.inter_k_w, c, rng);
  p.inter_k_b = Tensor<T>::zeros({c});
  p.inter_v_w = Tensor<T>::zeros({c, c});
  he_uniform_fill(p.inter_v_w, c, rng);
  p.inter_v_b = Tensor<T>::zeros({c});
  return p;
}

template <typename T>
void PieParams<T>::collect(std::vector<ParamRef<T>>& out, const std::string& prefix) const {
  add_param(out, prefix + ".q.kernel", q_kernel);
  add_param(out, prefix + ".q.bias", q_bias);
  add_param(out, prefix + ".k.kernel", k_kernel);
  add_param(out, prefix + ".k.bias", k_bias);
  add_param(out, prefix + ".v.kernel", v_kernel);
  add_param(out, prefix + ".v.bias", v_bias);
  add_param(out, prefix + ".pos_table", pos_table, /*weight_decay=*/false);
  add_param(out, prefix + ".inter_q.weight", inter_q_w);
  add_param(out, prefix + ".inter_q.bias", inter_q_b);
  add_param(out, prefix + ".inter_k.weight", inter_k_w);
  add_param(out, prefix + ".inter_k.bias", inter_k_b);
  add_param(out, prefix + ".inter_v.weight", inter_v_w);
  add_param(out, prefix + ".inter_v.bias", inter_v_b);
}

template <typename T>
PatchGrid<T> partition_patches(const Tensor<T>& x, int patch_size, bool shift) {
  LSEN_CHECK_ARG(patch_size >= 2, "partition_patches: patch size must be >= 2, got " +
                                      std::to_string(patch_size));
  LSEN_CHECK_DIM(x.rank() == 4,
                 "partition_patches: input must be [B,C,H,W], got " + shape_str(x.shape()));
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int p = patch_size;
  const int s = shift ? p / 2 : 0;  // interleaved grid offset, floor for odd P

  const int64_t h1 = h + 2 * s, w1 = w + 2 * s;
  const int dh = static_cast<int>((p - h1 % p) % p);
  const int dw = static_cast<int>((p - w1 % p) % p);

  PatchGrid<T> g;
  g.batch = b;
  g.channels = c;
  g.orig_h = h;
  g.orig_w = w;
  g.patch_size = p;
  g.pad_top = s + dh / 2;
  g.pad_bottom = s + dh - dh / 2;
  g.pad_left = s + dw / 2;
  g.pad_right = s + dw - dw / 2;

  Tensor<T> padded = (g.pad_top || g.pad_bottom || g.pad_left || g.pad_right)
                         ? ops::pad2d(x, g.pad_top, g.pad_bottom, g.pad_left, g.pad_right)
                         : x;
  const int64_t hp = h + g.pad_top + g.pad_bottom;
  const int64_t wp = w + g.pad_left + g.pad_right;
  g.n_h = hp / p;
  g.n_w = wp / p;

  Tensor<T> tiled = ops::reshape(padded, {b, c, g.n_h, p, g.n_w, p});
  Tensor<T> ordered = ops::permute(tiled, {0, 2, 4, 1, 3, 5});  // [B, nh, nw, C, P, P]
  g.patches = ops::reshape(ordered, {b * g.n_h * g.n_w, c, static_cast<int64_t>(p) * p});
  return g;
}

template <typename T>
Tensor<T> merge_patches(const PatchGrid<T>& g) {
  const int64_t p = g.patch_size;
  Tensor<T> tiled = ops::reshape(g.patches, {g.batch, g.n_h, g.n_w, g.channels, p, p});
  Tensor<T> ordered = ops::permute(tiled, {0, 3, 1, 4, 2, 5});  // [B, C, nh, P, nw, P]
  Tensor<T> full = ops::reshape(ordered, {g.batch, g.channels, g.n_h * p, g.n_w * p});
  if (g.pad_top || g.pad_bottom || g.pad_left || g.pad_right)
    return ops::crop2d(full, g.pad_top, g.pad_bottom, g.pad_left, g.pad_right);
  return full;
}

namespace {

// Attention over the P^2 pixels of every patch (channels as embedding),
// applied to already-projected q/k/v maps.
template <typename T>
Tensor<T> intra_attention_qkv(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                              const PieParams<T>& params, bool shift) {
  const int p = params.patch_size;
  PatchGrid<T> gq = partition_patches(q, p, shift);
  PatchGrid<T> gk = partition_patches(k, p, shift);
  PatchGrid<T> gv = partition_patches(v, p, shift);

  const T inv_sqrt_c = static_cast<T>(1.0 / std::sqrt(static_cast<double>(q.dim(1))));
  Tensor<T> qt = ops::permute(gq.patches, {0, 2, 1});                 // [BN, P2, C]
  Tensor<T> scores = ops::matmul(qt, gk.patches);                     // [BN, P2, P2]
  scores = ops::affine(ops::add(scores, params.pos_table), inv_sqrt_c, T(0));
  Tensor<T> att = ops::softmax_lastdim(scores);
  Tensor<T> out = ops::matmul(gv.patches, ops::permute(att, {0, 2, 1}));  // [BN, C, P2]

  PatchGrid<T> gout = gv;
  gout.patches = out;
  return merge_patches(gout);
}

template <typename T>
Tensor<T> linear_tokens(const Tensor<T>& tokens, const Tensor<T>& w, const Tensor<T>& b) {
  return ops::add(ops::matmul(tokens, w), b);
}

}  // namespace

template <typename T>
Tensor<T> intra_patch_attention(const Tensor<T>& x, const PieParams<T>& params, bool shift) {
  LSEN_CHECK_DIM(x.rank() == 4 && x.dim(1) == params.channels(),
                 "intra_patch_attention: channel mismatch");
  Tensor<T> q = ops::conv2d(x, params.q_kernel, params.q_bias, 1, 2);
  Tensor<T> k = ops::conv2d(x, params.k_kernel, params.k_bias, 1, 2);
  Tensor<T> v = ops::conv2d(x, params.v_kernel, params.v_bias, 1, 0);
  return intra_attention_qkv(q, k, v, params, shift);
}

template <typename T>
Tensor<T> inter_patch_attention(const Tensor<T>& x, const PieParams<T>& params) {
  LSEN_CHECK_DIM(x.rank() == 4 && x.dim(1) == params.channels(),
                 "inter_patch_attention: channel mismatch");
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  PatchGrid<T> g = partition_patches(x, params.patch_size, /*shift=*/false);

  Tensor<T> tokens = ops::reshape(ops::mean_lastdim(g.patches), {b, g.count(), c});
  Tensor<T> q = linear_tokens(tokens, params.inter_q_w, params.inter_q_b);
  Tensor<T> k = linear_tokens(tokens, params.inter_k_w, params.inter_k_b);
  Tensor<T> v = linear_tokens(tokens, params.inter_v_w, params.inter_v_b);

  const T inv_sqrt_c = static_cast<T>(1.0 / std::sqrt(static_cast<double>(c)));
  Tensor<T> scores = ops::affine(ops::matmul(q, ops::permute(k, {0, 2, 1})), inv_sqrt_c, T(0));
  Tensor<T> att = ops::softmax_lastdim(scores);          // [B, N, N]
  Tensor<T> out = ops::matmul(att, v);                   // [B, N, C]

  Tensor<T> map = ops::permute(ops::reshape(out, {b, g.n_h, g.n_w, c}), {0, 3, 1, 2});
  return ops::resize_bilinear(map, h, w);
}

template <typename T>
Tensor<T> pie_forward(const Tensor<T>& x, const PieParams<T>& params, Tensor<T>* heatmap) {
  LSEN_CHECK_DIM(x.rank() == 4 && x.dim(1) == params.channels(), "pie_forward: channel mismatch");
  // Projections are shared by the two intra branches; only the partition
  // offset differs.
  Tensor<T> q = ops::conv2d(x, params.q_kernel, params.q_bias, 1, 2);
  Tensor<T> k = ops::conv2d(x, params.k_kernel, params.k_bias, 1, 2);
  Tensor<T> v = ops::conv2d(x, params.v_kernel, params.v_bias, 1, 0);

  Tensor<T> intra = intra_attention_qkv(q, k, v, params, /*shift=*/false);
  Tensor<T> intra_shifted = intra_attention_qkv(q, k, v, params, /*shift=*/true);
  Tensor<T> inter = inter_patch_attention(x, params);

  Tensor<T> fused =
      ops::add(ops::affine(ops::add(intra, intra_shifted), T(0.5), T(0)), inter);
  Tensor<T> act = ops::relu(fused);
  if (heatmap) {
    const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> flat = ops::reshape(ops::permute(act, {0, 2, 3, 1}), {b * h * w, c});
    *heatmap = ops::reshape(ops::mean_lastdim(flat), {b, 1, h, w});
  }
  return ops::add(act, x);
}

#define LSEN_INSTANTIATE(T)                                                               \
  template struct PieParams<T>;                                                           \
  template PatchGrid<T> partition_patches<T>(const Tensor<T>&, int, bool);                \
  template Tensor<T> merge_patches<T>(const PatchGrid<T>&);                               \
  template Tensor<T> intra_patch_attention<T>(const Tensor<T>&, const PieParams<T>&, bool); \
  template Tensor<T> inter_patch_attention<T>(const Tensor<T>&, const PieParams<T>&);     \
  template Tensor<T> pie_forward<T>(const Tensor<T>&, const PieParams<T>&, Tensor<T>*);

LSEN_INSTANTIATE(float)
LSEN_INSTANTIATE(double)
#undef LSEN_INSTANTIATE

}  // namespace lsen
