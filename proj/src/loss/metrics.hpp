#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace lsen {

struct ConfusionCounts {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  int64_t total() const { return tp + fp + tn + fn; }
};

struct MetricReport {
  double dice = 0, sensitivity = 0, specificity = 0, accuracy = 0, fdr = 0, kappa = 0;
};

// Binarizes `pred_prob` at `threshold` (>= counts as positive) and tallies
// against a strictly binary target.
template <typename T>
ConfusionCounts confusion_counts(const Tensor<T>& pred_prob, const Tensor<T>& target,
                                 double threshold = 0.5);

ConfusionCounts confusion_counts(const float* pred_prob, const float* target, int64_t n,
                                 double threshold = 0.5);

// Six segmentation metrics. Zero-denominator sentinels: fdr=0 with no
// predicted positives, sensitivity=1 with no actual positives, specificity=1
// with no actual negatives, dice=1 when both prediction and target are
// empty, kappa=1 when expected agreement is 1.
MetricReport metrics_from_counts(const ConfusionCounts& c);

struct MetricStats {
  MetricReport mean, sd;  // population standard deviation
};

MetricStats aggregate_metrics(const std::vector<MetricReport>& reports);

// CSV serialization: "dataset,sample-id,dice,sen,spe,acc,fdr,kappa" with four
// decimal places, plus a mean +/- sd aggregate row.
std::string metric_csv_header();
std::string metric_csv_row(const std::string& dataset, const std::string& sample_id,
                           const MetricReport& r);
std::string metric_csv_aggregate(const std::string& dataset, const MetricStats& stats);

}  // namespace lsen
