#pragma once

#include <functional>
#include <string>
#include <vector>

#include "data/data.hpp"
#include "loss/metrics.hpp"
#include "net/network.hpp"

namespace lsen {

struct TrainConfig {
  double lr0 = 5e-4;
  double weight_decay = 1e-4;
  int epochs = 500;
  int batch_size = 2;
  double poly_power = 0.9;
  int patience = 100;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  uint64_t seed = 0;
  bool augment = true;

  void validate() const;
};

// lr0 * (1 - epoch/epochs)^power.
double poly_lr(int epoch, const TrainConfig& config);

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v;  // parallel to the parameter list
  int64_t step = 0;

  static AdamState init(const std::vector<ParamRef<T>>& params);
};

// One optimizer step. Decoupled weight decay (param *= 1 - lr*wd, applied
// before the moment update) on params flagged for decay; standard
// bias-corrected Adam update from the populated gradients.
template <typename T>
void adam_step(const std::vector<ParamRef<T>>& params, AdamState<T>& state, T lr,
               const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double lr = 0, train_loss = 0, val_dice = 0;
};

struct FitResult {
  std::vector<EpochRecord> history;
  double best_val_dice = 0;
  int best_epoch = -1;
  int epochs_run = 0;
  bool early_stopped = false;
};

struct FitOptions {
  std::string out_dir;       // when set, best.ckpt / last.ckpt / history are written
  std::string resume_from;   // checkpoint produced by a previous fit
  int stop_after_epoch = -1; // non-negative: stop after this epoch index (interruption)
  std::function<void(const EpochRecord&)> on_epoch;
};

// Full training loop: seeded shuffling, augmentation, combined loss, Adam
// with the polynomial schedule, per-epoch validation Dice at threshold 0.5,
// best-checkpoint tracking, early stopping.
template <typename T>
FitResult fit(const LsenetModel<T>& model, const std::vector<SamplePair>& train_set,
              const std::vector<SamplePair>& val_set, const TrainConfig& config,
              const FitOptions& options = {});

// ---- evaluation helpers ----

template <typename T>
MetricReport evaluate_sample(const LsenetModel<T>& model, const SamplePair& sample,
                             double threshold = 0.5);

template <typename T>
std::vector<MetricReport> evaluate_dataset(const LsenetModel<T>& model,
                                           const std::vector<SamplePair>& samples,
                                           double threshold = 0.5);

// Probability map for one sample (sigmoid of logits), via the padding
// forward; heatmaps optional as in forward().
template <typename T>
Tensor<T> predict_probabilities(const LsenetModel<T>& model, const SamplePair& sample,
                                std::vector<Tensor<T>>* heatmaps = nullptr);

}  // namespace lsen
