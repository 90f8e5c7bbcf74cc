#include "train/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "core/ops.hpp"
#include "loss/loss.hpp"
#include "net/checkpoint.hpp"

namespace lsen {

void TrainConfig::validate() const {
  LSEN_CHECK_ARG(lr0 > 0, "train: lr0 must be positive");
  LSEN_CHECK_ARG(weight_decay >= 0, "train: weight_decay must be non-negative");
  LSEN_CHECK_ARG(epochs >= 1, "train: epochs must be >= 1");
  LSEN_CHECK_ARG(batch_size >= 1, "train: batch_size must be >= 1");
  LSEN_CHECK_ARG(poly_power > 0, "train: poly_power must be positive");
  LSEN_CHECK_ARG(patience >= 1, "train: patience must be >= 1");
  LSEN_CHECK_ARG(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1,
                 "train: Adam betas must lie in (0,1)");
  LSEN_CHECK_ARG(eps > 0, "train: Adam eps must be positive");
}

double poly_lr(int epoch, const TrainConfig& config) {
  LSEN_CHECK_ARG(epoch >= 0 && epoch <= config.epochs,
                 "poly_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                     std::to_string(config.epochs) + "]");
  const double frac = 1.0 - static_cast<double>(epoch) / static_cast<double>(config.epochs);
  return config.lr0 * std::pow(frac, config.poly_power);
}

template <typename T>
AdamState<T> AdamState<T>::init(const std::vector<ParamRef<T>>& params) {
  AdamState<T> s;
  for (const auto& p : params) {
    s.m.push_back(Tensor<T>::zeros(p.tensor.shape()));
    s.v.push_back(Tensor<T>::zeros(p.tensor.shape()));
  }
  return s;
}

template <typename T>
void adam_step(const std::vector<ParamRef<T>>& params, AdamState<T>& state, T lr,
               const TrainConfig& config) {
  LSEN_CHECK_DIM(params.size() == state.m.size() && params.size() == state.v.size(),
                 "adam_step: state does not match parameter list");
  const int64_t t = ++state.step;
  const T b1 = static_cast<T>(config.beta1);
  const T b2 = static_cast<T>(config.beta2);
  const T corr1 = static_cast<T>(1.0 - std::pow(config.beta1, static_cast<double>(t)));
  const T corr2 = static_cast<T>(1.0 - std::pow(config.beta2, static_cast<double>(t)));
  const T eps = static_cast<T>(config.eps);
  const T decay = static_cast<T>(1.0 - static_cast<double>(lr) * config.weight_decay);

  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const T* g = p.tensor.grad();
    LSEN_CHECK_DIM(g != nullptr, "adam_step: parameter '" + p.name + "' has no gradient");
    T* w = p.tensor.data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const int64_t n = p.tensor.numel();
    const bool wd = p.weight_decay && config.weight_decay > 0;
    for (int64_t j = 0; j < n; ++j) {
      if (wd) w[j] *= decay;
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T mhat = m[j] / corr1;
      const T vhat = v[j] / corr2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

namespace {

template <typename T>
double validation_dice(const LsenetModel<T>& model, const std::vector<SamplePair>& val_set) {
  NoGradGuard<T> guard;
  double sum = 0;
  for (const auto& s : val_set) {
    std::vector<const SamplePair*> one{&s};
    Tensor<T> prob = ops::sigmoid(forward(model, stack_images<T>(one)));
    Tensor<T> mask = stack_masks<T>(one);
    sum += metrics_from_counts(confusion_counts(prob, mask, 0.5)).dice;
  }
  return sum / static_cast<double>(val_set.size());
}

// Locates the first non-finite tensor on the tape for the abort diagnostic.
template <typename T>
std::string first_nan_producer(const Tape<T>& tape) {
  for (size_t i = 0; i < tape.size(); ++i) {
    for (const T v : tape.node_output(i).vec())
      if (!std::isfinite(static_cast<double>(v)))
        return std::string(tape.op_name(i)) + " (node " + std::to_string(i) + ")";
  }
  return "loss (no earlier non-finite tensor found)";
}

std::string hexdouble(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

}  // namespace

template <typename T>
FitResult fit(const LsenetModel<T>& model, const std::vector<SamplePair>& train_set,
              const std::vector<SamplePair>& val_set, const TrainConfig& config,
              const FitOptions& options) {
  config.validate();
  LSEN_CHECK_ARG(!train_set.empty(), "fit: empty training set");
  LSEN_CHECK_ARG(!val_set.empty(), "fit: empty validation set");
  for (const auto& s : train_set)
    LSEN_CHECK_ARG(s.h % model.config.downsample_factor() == 0 &&
                       s.w % model.config.downsample_factor() == 0,
                   "fit: training sample '" + s.id + "' (" + std::to_string(s.w) + "x" +
                       std::to_string(s.h) + ") is not divisible by " +
                       std::to_string(model.config.downsample_factor()));

  std::vector<ParamRef<T>> params = model.parameters();
  AdamState<T> state = AdamState<T>::init(params);
  Rng root(config.seed);
  Rng shuffle_rng = root.split(0x73687566ULL);
  Rng aug_rng = root.split(0x617567ULL);

  int start_epoch = 0;
  double best = -1.0;
  int best_epoch = -1;
  int since_best = 0;

  auto moment_refs = [&]() {
    std::vector<ParamRef<T>> extra;
    for (size_t i = 0; i < params.size(); ++i) {
      extra.push_back({"adam.m." + params[i].name, state.m[i], false});
      extra.push_back({"adam.v." + params[i].name, state.v[i], false});
    }
    return extra;
  };

  if (!options.resume_from.empty()) {
    auto snapshot = load_checkpoint(options.resume_from, model, moment_refs());
    LSEN_CHECK_ARG(snapshot.count("step") && snapshot.count("epoch"),
                   options.resume_from + ": checkpoint carries no training state");
    state.step = std::stoll(snapshot.at("step"));
    start_epoch = std::stoi(snapshot.at("epoch")) + 1;
    best = std::strtod(snapshot.at("best_val_dice").c_str(), nullptr);
    best_epoch = std::stoi(snapshot.at("best_epoch"));
    since_best = std::stoi(snapshot.at("epochs_since_best"));
    shuffle_rng = Rng::deserialize(snapshot.at("rng_shuffle"));
    aug_rng = Rng::deserialize(snapshot.at("rng_augment"));
  }

  auto save_snapshot = [&](const std::string& name, int epoch) {
    if (options.out_dir.empty()) return;
    std::map<std::string, std::string> snapshot;
    snapshot["step"] = std::to_string(state.step);
    snapshot["epoch"] = std::to_string(epoch);
    snapshot["best_val_dice"] = hexdouble(best);
    snapshot["best_epoch"] = std::to_string(best_epoch);
    snapshot["epochs_since_best"] = std::to_string(since_best);
    snapshot["rng_shuffle"] = shuffle_rng.serialize();
    snapshot["rng_augment"] = aug_rng.serialize();
    save_checkpoint(options.out_dir + "/" + name, model, moment_refs(), snapshot);
  };

  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);

  FitResult result;
  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    const double lr = poly_lr(epoch, config);
    // Seeded Fisher-Yates shuffle.
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0;
    int64_t batches = 0;
    for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), pos + static_cast<size_t>(config.batch_size));
      std::vector<SamplePair> augmented;
      std::vector<const SamplePair*> batch;
      for (size_t b = pos; b < end; ++b) {
        if (config.augment)
          augmented.push_back(augment(train_set[order[b]], aug_rng));
        else
          augmented.push_back(train_set[order[b]]);
      }
      for (const auto& s : augmented) batch.push_back(&s);

      Tensor<T> x = stack_images<T>(batch);
      Tensor<T> y = stack_masks<T>(batch);
      Tape<T> tape;
      Tensor<T> prob = ops::sigmoid(forward(model, x));
      Tensor<T> loss = combined_loss(prob, y);
      const double loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value))
        throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch) +
                           "; first non-finite tensor produced by " + first_nan_producer(tape));
      tape.backward(loss);
      adam_step(params, state, static_cast<T>(lr), config);
      loss_sum += loss_value;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.val_dice = validation_dice(model, val_set);
    result.history.push_back(rec);
    result.epochs_run = epoch - start_epoch + 1;
    if (options.on_epoch) options.on_epoch(rec);

    if (rec.val_dice > best) {
      best = rec.val_dice;
      best_epoch = epoch;
      since_best = 0;
      save_snapshot("best.ckpt", epoch);
    } else {
      ++since_best;
    }
    save_snapshot("last.ckpt", epoch);

    if (since_best >= config.patience) {
      result.early_stopped = true;
      break;
    }
    if (options.stop_after_epoch >= 0 && epoch >= options.stop_after_epoch) break;
  }

  result.best_val_dice = best;
  result.best_epoch = best_epoch;
  return result;
}

template <typename T>
MetricReport evaluate_sample(const LsenetModel<T>& model, const SamplePair& sample,
                             double threshold) {
  NoGradGuard<T> guard;
  std::vector<const SamplePair*> one{&sample};
  Tensor<T> prob = ops::sigmoid(forward_padded(model, stack_images<T>(one)));
  return metrics_from_counts(confusion_counts(prob, stack_masks<T>(one), threshold));
}

template <typename T>
std::vector<MetricReport> evaluate_dataset(const LsenetModel<T>& model,
                                           const std::vector<SamplePair>& samples,
                                           double threshold) {
  std::vector<MetricReport> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(evaluate_sample(model, s, threshold));
  return out;
}

template <typename T>
Tensor<T> predict_probabilities(const LsenetModel<T>& model, const SamplePair& sample,
                                std::vector<Tensor<T>>* heatmaps) {
  NoGradGuard<T> guard;
  std::vector<const SamplePair*> one{&sample};
  return ops::sigmoid(forward_padded(model, stack_images<T>(one), heatmaps));
}

#define LSEN_INSTANTIATE(T)                                                                \
  template struct AdamState<T>;                                                            \
  template void adam_step<T>(const std::vector<ParamRef<T>>&, AdamState<T>&, T,            \
                             const TrainConfig&);                                          \
  template FitResult fit<T>(const LsenetModel<T>&, const std::vector<SamplePair>&,         \
                            const std::vector<SamplePair>&, const TrainConfig&,            \
                            const FitOptions&);                                            \
  template MetricReport evaluate_sample<T>(const LsenetModel<T>&, const SamplePair&, double); \
  template std::vector<MetricReport> evaluate_dataset<T>(                                  \
      const LsenetModel<T>&, const std::vector<SamplePair>&, double);                      \
  template Tensor<T> predict_probabilities<T>(const LsenetModel<T>&, const SamplePair&,    \
                                              std::vector<Tensor<T>>*);

LSEN_INSTANTIATE(float)
LSEN_INSTANTIATE(double)
#undef LSEN_INSTANTIATE

}  // namespace lsen
