#pragma once

#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace lsen {

// One grayscale image with its binary mask, both row-major [h*w].
struct SamplePair {
  std::vector<float> image;  // values in [0,1]
  std::vector<float> mask;   // strictly {0,1}
  int64_t h = 0, w = 0;
  std::string id;

  void check() const;  // asserts the invariants above
};

struct SynthConfig {
  int size = 96;
  int n_vessels_min = 3, n_vessels_max = 7;
  double thickness_min = 1.4, thickness_max = 3.2;  // pixels
  double contrast_min = 0.35, contrast_max = 0.75;  // vessel-background gap
  double noise_sigma = 0.04;
  double low_contrast_fraction = 0.0;  // fraction of segments at 30% gap
  uint64_t seed = 0;

  void validate() const;
};

// Deterministic per (config.seed, index).
SamplePair synth_sample(const SynthConfig& config, int index);
std::vector<SamplePair> generate_synthetic(const SynthConfig& config, int count);

// Deterministic core: optional flips then a rotation about the image center
// (bilinear for the image, nearest-neighbor for the mask, zero fill).
SamplePair augment_with(const SamplePair& pair, bool hflip, bool vflip, double angle_deg);
// Sampling policy: independent 50% flips, angle uniform in [-30, 30] degrees.
SamplePair augment(const SamplePair& pair, Rng& rng);

// Layout: root/split/images/*.png and root/split/masks/*.png with matching
// filenames. Pairs are sorted by filename. Missing split directory or a
// missing mask counterpart raise ArgumentError naming the path.
std::vector<SamplePair> load_dataset(const std::string& root, const std::string& split);
void save_dataset(const std::vector<SamplePair>& samples, const std::string& root,
                  const std::string& split);

// Batch assembly: stacks samples into [B,1,H,W] image/mask tensors.
template <typename T>
Tensor<T> stack_images(const std::vector<const SamplePair*>& batch);
template <typename T>
Tensor<T> stack_masks(const std::vector<const SamplePair*>& batch);

}  // namespace lsen
