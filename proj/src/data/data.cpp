#include "data/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "data/image_io.hpp"

namespace fs = std::filesystem;

namespace lsen {

void SamplePair::check() const {
  LSEN_CHECK_ARG(h > 0 && w > 0, "SamplePair: empty dimensions");
  LSEN_CHECK_ARG(static_cast<int64_t>(image.size()) == h * w &&
                     static_cast<int64_t>(mask.size()) == h * w,
                 "SamplePair: buffer sizes disagree with dimensions");
  for (float v : image)
    LSEN_CHECK_ARG(v >= 0.f && v <= 1.f, "SamplePair: image value outside [0,1]");
  for (float v : mask) LSEN_CHECK_ARG(v == 0.f || v == 1.f, "SamplePair: mask not binary");
}

void SynthConfig::validate() const {
  LSEN_CHECK_ARG(size >= 16 && size % 8 == 0, "synth: size must be a multiple of 8, >= 16");
  LSEN_CHECK_ARG(n_vessels_min >= 1 && n_vessels_max >= n_vessels_min, "synth: bad vessel count");
  LSEN_CHECK_ARG(thickness_min > 0 && thickness_max >= thickness_min, "synth: bad thickness");
  LSEN_CHECK_ARG(contrast_min > 0 && contrast_max <= 1.0 && contrast_max >= contrast_min,
                 "synth: contrast range must lie in (0,1]");
  LSEN_CHECK_ARG(noise_sigma >= 0, "synth: negative noise");
  LSEN_CHECK_ARG(low_contrast_fraction >= 0 && low_contrast_fraction <= 1,
                 "synth: low_contrast_fraction must lie in [0,1]");
}

namespace {

struct Canvas {
  int n;
  std::vector<float> mask;
  std::vector<float> gap;  // per-pixel vessel intensity offset

  void stamp(double cx, double cy, double radius, float g) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int x1 = std::min(n - 1, static_cast<int>(std::ceil(cx + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int y1 = std::min(n - 1, static_cast<int>(std::ceil(cy + radius)));
    const double r2 = radius * radius;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        if (dx * dx + dy * dy <= r2) {
          mask[static_cast<size_t>(y) * n + x] = 1.f;
          float& cell = gap[static_cast<size_t>(y) * n + x];
          cell = std::max(cell, g);
        }
      }
  }
};

// Walks one smooth curve, stamping disks; segments of ~8 steps share one
// contrast level so low-contrast stretches look like the faint vessel runs
// that motivate the generator.
void draw_vessel(Canvas& canvas, Rng& rng, const SynthConfig& cfg, double x, double y,
                 double heading, double length, double thickness, int depth) {
  const double nominal = rng.uniform(cfg.contrast_min, cfg.contrast_max);
  const double taper = rng.uniform(0.5, 0.9);
  double omega = 0.0;
  int steps = static_cast<int>(length);
  float seg_gap = 0.f;
  for (int i = 0; i < steps; ++i) {
    if (i % 8 == 0) {
      const bool faint = rng.bernoulli(cfg.low_contrast_fraction);
      seg_gap = static_cast<float>(faint ? 0.3 * nominal : nominal);
    }
    const double t = static_cast<double>(i) / std::max(1, steps - 1);
    const double r = 0.5 * thickness * (1.0 - (1.0 - taper) * t);
    canvas.stamp(x, y, std::max(0.6, r), seg_gap);
    omega = 0.7 * omega + 0.3 * rng.normal() * 0.25;
    heading += omega;
    x += std::cos(heading);
    y += std::sin(heading);
    if (x < -thickness || y < -thickness || x > canvas.n + thickness || y > canvas.n + thickness)
      break;
    if (depth < 2 && i > steps / 4 && rng.bernoulli(0.02)) {
      const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
      draw_vessel(canvas, rng, cfg, x, y, heading + side * rng.uniform(0.5, 1.1), length * 0.5,
                  thickness * 0.7, depth + 1);
    }
  }
}

}  // namespace

SamplePair synth_sample(const SynthConfig& cfg, int index) {
  cfg.validate();
  Rng rng = Rng(cfg.seed).split(0x73796e7468ULL).split(static_cast<uint64_t>(index));
  const int n = cfg.size;

  // Smooth background: a low base plus a few random cosine waves, kept well
  // below the vessel intensity band.
  std::vector<float> bg(static_cast<size_t>(n) * n);
  const double base = rng.uniform(0.10, 0.18);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 3; ++k)
    waves.push_back({rng.uniform(-2.5, 2.5) * 2.0 * M_PI / n, rng.uniform(-2.5, 2.5) * 2.0 * M_PI / n,
                     rng.uniform(0, 2.0 * M_PI), rng.uniform(0.02, 0.06)});
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double v = base;
      for (const auto& wv : waves) v += wv.amp * std::cos(wv.fx * x + wv.fy * y + wv.phase);
      bg[static_cast<size_t>(y) * n + x] = static_cast<float>(std::max(0.0, v));
    }

  Canvas canvas{n, std::vector<float>(static_cast<size_t>(n) * n, 0.f),
                std::vector<float>(static_cast<size_t>(n) * n, 0.f)};
  const int vessels = static_cast<int>(rng.uniform_int(cfg.n_vessels_min, cfg.n_vessels_max));
  for (int v = 0; v < vessels; ++v) {
    // Start near one border, heading inward.
    const int edge = static_cast<int>(rng.uniform_int(0, 3));
    double x, y, heading;
    const double along = rng.uniform(0.1, 0.9) * n;
    switch (edge) {
      case 0: x = along; y = 1; heading = rng.uniform(0.25 * M_PI, 0.75 * M_PI); break;
      case 1: x = along; y = n - 2; heading = rng.uniform(-0.75 * M_PI, -0.25 * M_PI); break;
      case 2: x = 1; y = along; heading = rng.uniform(-0.25 * M_PI, 0.25 * M_PI); break;
      default: x = n - 2; y = along; heading = M_PI + rng.uniform(-0.25 * M_PI, 0.25 * M_PI); break;
    }
    const double length = rng.uniform(0.7, 1.5) * n;
    const double thickness = rng.uniform(cfg.thickness_min, cfg.thickness_max);
    draw_vessel(canvas, rng, cfg, x, y, heading, length, thickness, 0);
  }

  SamplePair pair;
  pair.h = n;
  pair.w = n;
  pair.id = "synth_" + std::to_string(index);
  pair.mask = std::move(canvas.mask);
  pair.image.resize(static_cast<size_t>(n) * n);
  for (size_t i = 0; i < pair.image.size(); ++i) {
    double v = bg[i] + canvas.gap[i];
    if (cfg.noise_sigma > 0) v += cfg.noise_sigma * rng.normal();
    pair.image[i] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
  }
  return pair;
}

std::vector<SamplePair> generate_synthetic(const SynthConfig& cfg, int count) {
  LSEN_CHECK_ARG(count >= 0, "generate_synthetic: negative count");
  std::vector<SamplePair> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(synth_sample(cfg, i));
  return out;
}

SamplePair augment_with(const SamplePair& pair, bool hflip, bool vflip, double angle_deg) {
  const int64_t h = pair.h, w = pair.w;
  SamplePair out;
  out.h = h;
  out.w = w;
  out.id = pair.id;
  out.image.resize(pair.image.size());
  out.mask.resize(pair.mask.size());

  auto src_index = [&](int64_t x, int64_t y) {
    const int64_t sx = hflip ? w - 1 - x : x;
    const int64_t sy = vflip ? h - 1 - y : y;
    return sy * w + sx;
  };

  const double rad = angle_deg * M_PI / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;

  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      // Inverse rotation from output pixel to flipped-source coordinates.
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      const double sxf = cx + c * dx + s * dy;
      const double syf = cy - s * dx + c * dy;
      float img = 0.f, msk = 0.f;
      if (sxf >= 0.0 && sxf <= static_cast<double>(w - 1) && syf >= 0.0 &&
          syf <= static_cast<double>(h - 1)) {
        const int64_t x0 = static_cast<int64_t>(std::floor(sxf));
        const int64_t y0 = static_cast<int64_t>(std::floor(syf));
        const int64_t x1 = std::min(x0 + 1, w - 1);
        const int64_t y1 = std::min(y0 + 1, h - 1);
        const double fx = sxf - static_cast<double>(x0);
        const double fy = syf - static_cast<double>(y0);
        const double v00 = pair.image[static_cast<size_t>(src_index(x0, y0))];
        const double v01 = pair.image[static_cast<size_t>(src_index(x1, y0))];
        const double v10 = pair.image[static_cast<size_t>(src_index(x0, y1))];
        const double v11 = pair.image[static_cast<size_t>(src_index(x1, y1))];
        img = static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                 fy * ((1 - fx) * v10 + fx * v11));
        const int64_t nx = static_cast<int64_t>(std::lround(sxf));
        const int64_t ny = static_cast<int64_t>(std::lround(syf));
        msk = pair.mask[static_cast<size_t>(src_index(nx, ny))];
      }
      out.image[static_cast<size_t>(y * w + x)] = img;
      out.mask[static_cast<size_t>(y * w + x)] = msk;
    }
  }
  return out;
}

SamplePair augment(const SamplePair& pair, Rng& rng) {
  const bool hflip = rng.bernoulli(0.5);
  const bool vflip = rng.bernoulli(0.5);
  const double angle = rng.uniform(-30.0, 30.0);
  return augment_with(pair, hflip, vflip, angle);
}

std::vector<SamplePair> load_dataset(const std::string& root, const std::string& split) {
  const fs::path split_dir = fs::path(root) / split;
  if (!fs::exists(split_dir))
    throw ArgumentError("dataset split directory does not exist: " + split_dir.string());
  const fs::path images = split_dir / "images";
  const fs::path masks = split_dir / "masks";

  std::vector<std::string> names;
  if (fs::exists(images))
    for (const auto& entry : fs::directory_iterator(images))
      if (entry.is_regular_file() && entry.path().extension() == ".png")
        names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());

  std::vector<SamplePair> out;
  for (const auto& name : names) {
    const fs::path mask_path = masks / name;
    if (!fs::exists(mask_path))
      throw ArgumentError("missing mask counterpart for image '" + name +
                          "': " + mask_path.string());
    GrayImage img = read_gray_png((images / name).string());
    GrayImage msk = read_gray_png(mask_path.string());
    LSEN_CHECK_DIM(img.width == msk.width && img.height == msk.height,
                   "image/mask size mismatch for '" + name + "'");
    SamplePair pair;
    pair.w = img.width;
    pair.h = img.height;
    pair.id = name.substr(0, name.size() - 4);
    pair.image.resize(img.pixels.size());
    pair.mask.resize(msk.pixels.size());
    for (size_t i = 0; i < img.pixels.size(); ++i)
      pair.image[i] = static_cast<float>(img.pixels[i]) / 255.f;
    for (size_t i = 0; i < msk.pixels.size(); ++i) pair.mask[i] = msk.pixels[i] >= 128 ? 1.f : 0.f;
    out.push_back(std::move(pair));
  }
  return out;
}

void save_dataset(const std::vector<SamplePair>& samples, const std::string& root,
                  const std::string& split) {
  const fs::path split_dir = fs::path(root) / split;
  fs::create_directories(split_dir / "images");
  fs::create_directories(split_dir / "masks");
  for (const auto& s : samples) {
    GrayImage img{s.w, s.h, {}};
    img.pixels.resize(s.image.size());
    for (size_t i = 0; i < s.image.size(); ++i)
      img.pixels[i] = static_cast<uint8_t>(std::lround(s.image[i] * 255.f));
    GrayImage msk{s.w, s.h, {}};
    msk.pixels.resize(s.mask.size());
    for (size_t i = 0; i < s.mask.size(); ++i) msk.pixels[i] = s.mask[i] == 1.f ? 255 : 0;
    write_gray_png((split_dir / "images" / (s.id + ".png")).string(), img);
    write_gray_png((split_dir / "masks" / (s.id + ".png")).string(), msk);
  }
}

template <typename T>
Tensor<T> stack_images(const std::vector<const SamplePair*>& batch) {
  LSEN_CHECK_ARG(!batch.empty(), "stack_images: empty batch");
  const int64_t h = batch[0]->h, w = batch[0]->w;
  Tensor<T> t = Tensor<T>::zeros({static_cast<int64_t>(batch.size()), 1, h, w});
  T* dst = t.data();
  for (size_t b = 0; b < batch.size(); ++b) {
    LSEN_CHECK_DIM(batch[b]->h == h && batch[b]->w == w, "stack_images: mixed resolutions");
    for (int64_t i = 0; i < h * w; ++i)
      dst[b * static_cast<size_t>(h * w) + i] = static_cast<T>(batch[b]->image[i]);
  }
  return t;
}

template <typename T>
Tensor<T> stack_masks(const std::vector<const SamplePair*>& batch) {
  LSEN_CHECK_ARG(!batch.empty(), "stack_masks: empty batch");
  const int64_t h = batch[0]->h, w = batch[0]->w;
  Tensor<T> t = Tensor<T>::zeros({static_cast<int64_t>(batch.size()), 1, h, w});
  T* dst = t.data();
  for (size_t b = 0; b < batch.size(); ++b) {
    LSEN_CHECK_DIM(batch[b]->h == h && batch[b]->w == w, "stack_masks: mixed resolutions");
    for (int64_t i = 0; i < h * w; ++i)
      dst[b * static_cast<size_t>(h * w) + i] = static_cast<T>(batch[b]->mask[i]);
  }
  return t;
}

#define LSEN_INSTANTIATE(T)                                                  \
  template Tensor<T> stack_images<T>(const std::vector<const SamplePair*>&); \
  template Tensor<T> stack_masks<T>(const std::vector<const SamplePair*>&);

LSEN_INSTANTIATE(float)
LSEN_INSTANTIATE(double)
#undef LSEN_INSTANTIATE

}  // namespace lsen
