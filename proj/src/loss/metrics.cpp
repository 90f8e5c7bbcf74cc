#include "loss/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace lsen {

template <typename T>
ConfusionCounts confusion_counts(const Tensor<T>& pred_prob, const Tensor<T>& target,
                                 double threshold) {
  LSEN_CHECK_DIM(pred_prob.shape() == target.shape(),
                 "confusion_counts: prediction and target shapes differ");
  ConfusionCounts c;
  const T* p = pred_prob.data();
  const T* t = target.data();
  const int64_t n = pred_prob.numel();
  for (int64_t i = 0; i < n; ++i) {
    LSEN_CHECK_ARG(t[i] == T(0) || t[i] == T(1),
                   "confusion_counts: target is not binary at element " + std::to_string(i));
    const bool pos = static_cast<double>(p[i]) >= threshold;
    const bool truth = t[i] == T(1);
    if (pos && truth) ++c.tp;
    else if (pos && !truth) ++c.fp;
    else if (!pos && truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ConfusionCounts confusion_counts(const float* pred_prob, const float* target, int64_t n,
                                 double threshold) {
  ConfusionCounts c;
  for (int64_t i = 0; i < n; ++i) {
    LSEN_CHECK_ARG(target[i] == 0.f || target[i] == 1.f,
                   "confusion_counts: target is not binary at element " + std::to_string(i));
    const bool pos = static_cast<double>(pred_prob[i]) >= threshold;
    const bool truth = target[i] == 1.f;
    if (pos && truth) ++c.tp;
    else if (pos && !truth) ++c.fp;
    else if (!pos && truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

MetricReport metrics_from_counts(const ConfusionCounts& c) {
  LSEN_CHECK_ARG(c.total() > 0, "metrics_from_counts: empty counts");
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  const double total = tp + fp + tn + fn;
  MetricReport r;
  r.dice = (2 * tp + fp + fn) > 0 ? 2 * tp / (2 * tp + fp + fn) : 1.0;
  r.sensitivity = (tp + fn) > 0 ? tp / (tp + fn) : 1.0;
  r.specificity = (tn + fp) > 0 ? tn / (tn + fp) : 1.0;
  r.accuracy = (tp + tn) / total;
  r.fdr = (tp + fp) > 0 ? fp / (tp + fp) : 0.0;
  const double pe = ((tp + fp) * (tp + fn) + (tn + fn) * (tn + fp)) / (total * total);
  r.kappa = pe < 1.0 ? (r.accuracy - pe) / (1.0 - pe) : 1.0;
  return r;
}

MetricStats aggregate_metrics(const std::vector<MetricReport>& reports) {
  MetricStats s;
  const double n = static_cast<double>(reports.size());
  if (reports.empty()) return s;
  auto each = [](MetricReport& r, auto fn) {
    fn(r.dice);
    fn(r.sensitivity);
    fn(r.specificity);
    fn(r.accuracy);
    fn(r.fdr);
    fn(r.kappa);
  };
  for (const auto& r : reports) {
    s.mean.dice += r.dice;
    s.mean.sensitivity += r.sensitivity;
    s.mean.specificity += r.specificity;
    s.mean.accuracy += r.accuracy;
    s.mean.fdr += r.fdr;
    s.mean.kappa += r.kappa;
  }
  each(s.mean, [n](double& v) { v /= n; });
  for (const auto& r : reports) {
    s.sd.dice += (r.dice - s.mean.dice) * (r.dice - s.mean.dice);
    s.sd.sensitivity += (r.sensitivity - s.mean.sensitivity) * (r.sensitivity - s.mean.sensitivity);
    s.sd.specificity += (r.specificity - s.mean.specificity) * (r.specificity - s.mean.specificity);
    s.sd.accuracy += (r.accuracy - s.mean.accuracy) * (r.accuracy - s.mean.accuracy);
    s.sd.fdr += (r.fdr - s.mean.fdr) * (r.fdr - s.mean.fdr);
    s.sd.kappa += (r.kappa - s.mean.kappa) * (r.kappa - s.mean.kappa);
  }
  each(s.sd, [n](double& v) { v = std::sqrt(v / n); });
  return s;
}

namespace {

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string metric_csv_header() {
  return "dataset,sample_id,dice,sensitivity,specificity,accuracy,fdr,kappa";
}

std::string metric_csv_row(const std::string& dataset, const std::string& sample_id,
                           const MetricReport& r) {
  return dataset + "," + sample_id + "," + fmt4(r.dice) + "," + fmt4(r.sensitivity) + "," +
         fmt4(r.specificity) + "," + fmt4(r.accuracy) + "," + fmt4(r.fdr) + "," + fmt4(r.kappa);
}

std::string metric_csv_aggregate(const std::string& dataset, const MetricStats& s) {
  auto pm = [](double mean, double sd) { return fmt4(mean) + " +/- " + fmt4(sd); };
  return dataset + ",mean_sd," + pm(s.mean.dice, s.sd.dice) + "," +
         pm(s.mean.sensitivity, s.sd.sensitivity) + "," +
         pm(s.mean.specificity, s.sd.specificity) + "," + pm(s.mean.accuracy, s.sd.accuracy) +
         "," + pm(s.mean.fdr, s.sd.fdr) + "," + pm(s.mean.kappa, s.sd.kappa);
}

template ConfusionCounts confusion_counts<float>(const Tensor<float>&, const Tensor<float>&,
                                                 double);
template ConfusionCounts confusion_counts<double>(const Tensor<double>&, const Tensor<double>&,
                                                  double);

}  // namespace lsen
