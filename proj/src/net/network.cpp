#include "net/network.hpp"

#include <map>

#include "core/ops.hpp"

namespace lsen {

void LsenetConfig::validate() const {
  LSEN_CHECK_ARG(layers >= 2, "config: layers must be >= 2, got " + std::to_string(layers));
  LSEN_CHECK_ARG(channels >= 8 && channels % 8 == 0,
                 "config: channels must be a positive multiple of 8, got " +
                     std::to_string(channels));
  LSEN_CHECK_ARG(patch_size >= 2, "config: patch_size must be >= 2, got " +
                                      std::to_string(patch_size));
  LSEN_CHECK_ARG(in_channels >= 1, "config: in_channels must be >= 1");
}

template <typename T>
PlainStageParams<T> PlainStageParams<T>::init(int cin, int channels, Rng& rng) {
  PlainStageParams<T> p;
  p.conv_a = ConvBlockParams<T>::init(cin, channels, 3, rng);
  p.conv_b = ConvBlockParams<T>::init(channels, channels, 3, rng);
  return p;
}

template <typename T>
void PlainStageParams<T>::collect(std::vector<ParamRef<T>>& out,
                                  const std::string& prefix) const {
  conv_a.collect(out, prefix + ".conv_a");
  conv_b.collect(out, prefix + ".conv_b");
}

template <typename T>
LsenetModel<T> build(const LsenetConfig& config) {
  config.validate();
  Rng rng = Rng(config.seed).split(0x6d6f64656cULL);  // parameter stream
  LsenetModel<T> m;
  m.config = config;
  const int c = config.channels;
  for (int l = 0; l < config.layers; ++l) {
    if (config.enable_mff)
      m.mff.push_back(MffParams<T>::init(config.in_channels, c, /*has_down=*/l > 0, rng));
    else
      m.enc.push_back(PlainStageParams<T>::init(l == 0 ? config.in_channels : c, c, rng));
    if (config.enable_pie) m.pie.push_back(PieParams<T>::init(c, config.patch_size, rng));
  }
  for (int l = 0; l < config.layers - 1; ++l) {
    if (config.enable_crd)
      m.crd.push_back(CrdParams<T>::init(c, rng));
    else
      m.dec.push_back(PlainStageParams<T>::init(2 * c, c, rng));
  }
  m.out = config.enable_crd ? OutConvParams<T>::init_large(c, rng)
                            : OutConvParams<T>::init_plain(c, rng);
  m.parameters();  // flags every tensor as trainable
  return m;
}

template <typename T>
std::vector<ParamRef<T>> LsenetModel<T>::parameters() const {
  std::vector<ParamRef<T>> refs;
  for (size_t l = 0; l < mff.size(); ++l) mff[l].collect(refs, "mff" + std::to_string(l));
  for (size_t l = 0; l < enc.size(); ++l) enc[l].collect(refs, "enc" + std::to_string(l));
  for (size_t l = 0; l < pie.size(); ++l) pie[l].collect(refs, "pie" + std::to_string(l));
  for (size_t l = 0; l < crd.size(); ++l) crd[l].collect(refs, "crd" + std::to_string(l));
  for (size_t l = 0; l < dec.size(); ++l) dec[l].collect(refs, "dec" + std::to_string(l));
  out.collect(refs, "out");
  return refs;
}

template <typename T>
int64_t LsenetModel<T>::param_count() const {
  int64_t total = 0;
  for (const auto& p : parameters()) total += p.tensor.numel();
  return total;
}

template <typename T>
Tensor<T> forward(const LsenetModel<T>& model, const Tensor<T>& x,
                  std::vector<Tensor<T>>* heatmaps) {
  const LsenetConfig& cfg = model.config;
  LSEN_CHECK_DIM(x.rank() == 4 && x.dim(1) == cfg.in_channels,
                 "forward: input must be [B," + std::to_string(cfg.in_channels) + ",H,W], got " +
                     shape_str(x.shape()));
  const int64_t h = x.dim(2), w = x.dim(3);
  const int div = cfg.downsample_factor();
  LSEN_CHECK_ARG(h % div == 0 && w % div == 0,
                 "forward: spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                     " must be divisible by " + std::to_string(div) +
                     " (= 2^(layers-1)); pad the input or use forward_padded");
  if (heatmaps) heatmaps->clear();

  std::vector<Tensor<T>> skips;
  Tensor<T> raw = x;   // raw input pooled to the current layer's resolution
  Tensor<T> feat;      // previous stage output on the standard path
  for (int l = 0; l < cfg.layers; ++l) {
    if (l > 0) raw = ops::pool2d(raw, PoolKind::kAvg, 2, 2);
    Tensor<T> f;
    if (cfg.enable_mff) {
      Tensor<T> down = l > 0 ? ops::pool2d(feat, PoolKind::kMax, 2, 2) : Tensor<T>();
      f = mff_forward(raw, down, model.mff[static_cast<size_t>(l)]);
    } else {
      Tensor<T> in = l > 0 ? ops::pool2d(feat, PoolKind::kMax, 2, 2) : x;
      f = model.enc[static_cast<size_t>(l)].forward(in);
    }
    feat = f;
    if (cfg.enable_pie) {
      Tensor<T> hm;
      Tensor<T> s = pie_forward(f, model.pie[static_cast<size_t>(l)], heatmaps ? &hm : nullptr);
      if (heatmaps) heatmaps->push_back(hm);
      skips.push_back(s);
    } else {
      skips.push_back(f);
    }
  }

  Tensor<T> d = skips.back();
  for (int l = cfg.layers - 2; l >= 0; --l) {
    const Tensor<T>& skip = skips[static_cast<size_t>(l)];
    Tensor<T> up = ops::resize_bilinear(d, skip.dim(2), skip.dim(3));
    if (cfg.enable_crd)
      d = crd_stage(up, skip, model.crd[static_cast<size_t>(l)]);
    else
      d = model.dec[static_cast<size_t>(l)].forward(ops::concat<T>({up, skip}, 1));
  }
  return out_conv(d, model.out);
}

template <typename T>
Tensor<T> forward_padded(const LsenetModel<T>& model, const Tensor<T>& x,
                         std::vector<Tensor<T>>* heatmaps) {
  const int div = model.config.downsample_factor();
  const int64_t h = x.dim(2), w = x.dim(3);
  const int dh = static_cast<int>((div - h % div) % div);
  const int dw = static_cast<int>((div - w % div) % div);
  if (dh == 0 && dw == 0) return forward(model, x, heatmaps);
  Tensor<T> padded = ops::pad2d(x, dh / 2, dh - dh / 2, dw / 2, dw - dw / 2);
  Tensor<T> logits = forward(model, padded, heatmaps);
  return ops::crop2d(logits, dh / 2, dh - dh / 2, dw / 2, dw - dw / 2);
}

namespace {

struct FlopTally {
  FlopCount total;

  void conv(int64_t cin, int64_t cout, int64_t k, int64_t hw, bool bias, bool gn_relu) {
    total.conv_macs += cin * k * k * cout * hw;
    if (bias) total.elementwise += cout * hw;
    // GroupNorm ~ 8 passes worth of elementwise work, ReLU 1.
    if (gn_relu) total.elementwise += 9 * cout * hw;
  }

  void linear(int64_t rows, int64_t cin, int64_t cout) {
    total.matmul_macs += rows * cin * cout;
    total.elementwise += rows * cout;  // bias
  }
};

int64_t padded_side(int64_t side, int64_t p, int64_t shift_pad) {
  const int64_t s1 = side + 2 * shift_pad;
  return s1 + (p - s1 % p) % p;
}

}  // namespace

FlopCount count_flops(const LsenetConfig& cfg, int64_t h, int64_t w) {
  cfg.validate();
  LSEN_CHECK_ARG(h % cfg.downsample_factor() == 0 && w % cfg.downsample_factor() == 0,
                 "count_flops: resolution must be divisible by 2^(layers-1)");
  FlopTally t;
  const int64_t c = cfg.channels;
  const int64_t p = cfg.patch_size;
  const int64_t p2 = p * p;

  for (int l = 0; l < cfg.layers; ++l) {
    const int64_t hl = h >> l, wl = w >> l;
    const int64_t hw = hl * wl;
    if (l > 0) t.total.elementwise += 4 * hw * (cfg.enable_mff ? cfg.in_channels : 0);  // avg pool
    if (l > 0) t.total.elementwise += 4 * hw * c;  // max pool on the standard path

    if (cfg.enable_mff) {
      t.conv(cfg.in_channels, c, 3, hw, true, true);  // pre
      t.conv(c, c, 1, hw, true, true);                // branch 1x1
      t.conv(c, c, 3, hw, true, true);                // branch 3x3
      t.conv(c, c, 5, hw, true, true);                // branch 5x5
      const int64_t c3 = 3 * c;
      const int64_t hidden = std::max<int64_t>(c3 / kCaReduction, 1);
      t.total.elementwise += c3 * hw;  // squeeze mean
      t.linear(1, c3, hidden);
      t.linear(1, hidden, c3);
      t.total.elementwise += hidden + 5 * c3 + c3 * hw;  // relu, sigmoid, gate scale
      t.conv(l > 0 ? 4 * c : 3 * c, c, 1, hw, true, true);  // fuse
      t.conv(c, c, 3, hw, true, true);                      // out
    } else {
      t.conv(l == 0 ? cfg.in_channels : c, c, 3, hw, true, true);
      t.conv(c, c, 3, hw, true, true);
    }

    if (cfg.enable_pie) {
      // Projections are computed once and partitioned by both intra branches.
      t.conv(c, c, 5, hw, true, false);  // q
      t.conv(c, c, 5, hw, true, false);  // k
      t.conv(c, c, 1, hw, true, false);  // v
      for (const bool shift : {false, true}) {
        const int64_t sp = shift ? p / 2 : 0;
        const int64_t hp = padded_side(hl, p, sp), wp = padded_side(wl, p, sp);
        const int64_t n = (hp / p) * (wp / p);
        t.total.matmul_macs += 2 * n * p2 * p2 * c;       // scores and value mix
        t.total.elementwise += n * p2 * p2 * (2 + 4);     // pos add, scale, softmax
      }
      // Inter branch: tokens at the unshifted grid.
      const int64_t n = (padded_side(hl, p, 0) / p) * (padded_side(wl, p, 0) / p);
      t.total.elementwise += n * c * p2;  // token means
      t.linear(n, c, c);                  // q
      t.linear(n, c, c);                  // k
      t.linear(n, c, c);                  // v
      t.total.matmul_macs += 2 * n * n * c;
      t.total.elementwise += n * n * 4 + 8 * c * hw;  // softmax, bilinear resize
      t.total.elementwise += 4 * c * hw;              // branch fusion, relu, residual
    }
  }

  for (int l = cfg.layers - 2; l >= 0; --l) {
    const int64_t hw = (h >> l) * (w >> l);
    t.total.elementwise += 8 * c * hw;  // bilinear upsample
    if (cfg.enable_crd) {
      t.conv(2 * c, c, 1, hw, true, true);
      t.conv(c, c, 3, hw, true, true);
      t.conv(c, c, 3, hw, true, true);
    } else {
      t.conv(2 * c, c, 3, hw, true, true);
      t.conv(c, c, 3, hw, true, true);
    }
  }

  if (cfg.enable_crd)
    t.conv(c, 1, 11, h * w, false, false);
  else
    t.conv(c, 1, 1, h * w, true, false);
  return t.total;
}

template <typename T>
std::vector<ModuleParamCount> param_breakdown(const LsenetModel<T>& model) {
  // Aggregate by the prefix before the first '.' (mff0, pie2, out, ...).
  std::vector<ModuleParamCount> rows;
  std::map<std::string, size_t> index;
  for (const auto& p : model.parameters()) {
    const std::string key = p.name.substr(0, p.name.find('.'));
    auto [it, inserted] = index.try_emplace(key, rows.size());
    if (inserted) rows.push_back({key, 0});
    rows[it->second].params += p.tensor.numel();
  }
  return rows;
}

#define LSEN_INSTANTIATE(T)                                                            \
  template struct PlainStageParams<T>;                                                 \
  template struct LsenetModel<T>;                                                      \
  template LsenetModel<T> build<T>(const LsenetConfig&);                               \
  template Tensor<T> forward<T>(const LsenetModel<T>&, const Tensor<T>&,               \
                                std::vector<Tensor<T>>*);                              \
  template Tensor<T> forward_padded<T>(const LsenetModel<T>&, const Tensor<T>&,        \
                                       std::vector<Tensor<T>>*);                       \
  template std::vector<ModuleParamCount> param_breakdown<T>(const LsenetModel<T>&);

LSEN_INSTANTIATE(float)
LSEN_INSTANTIATE(double)
#undef LSEN_INSTANTIATE

}  // namespace lsen
