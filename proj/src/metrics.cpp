#include "repeatlab/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "repeatlab/errors.hpp"

namespace repeatlab {

namespace {

void check_class_value(int value, int k, const char* what) {
  if (value < 0 || value >= k) {
    throw_args(std::string(what) + " " + std::to_string(value) + " outside [0, " +
               std::to_string(k - 1) + "]");
  }
}

void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw_args("probability " + std::to_string(p) + " outside [0, 1]");
  }
}

}  // namespace

ConfusionMatrix ConfusionMatrix::from_pairs(std::span<const int> labels,
                                            std::span<const int> predictions, int k) {
  if (k < 2) throw_args("confusion matrix requires k >= 2");
  if (labels.size() != predictions.size()) {
    throw_args("labels and predictions differ in length");
  }
  if (labels.empty()) throw_args("confusion matrix requires at least one pair");
  ConfusionMatrix cm;
  cm.k = k;
  cm.counts.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_class_value(labels[i], k, "label");
    check_class_value(predictions[i], k, "prediction");
    ++cm.counts[static_cast<std::size_t>(labels[i] * k + predictions[i])];
  }
  return cm;
}

long long ConfusionMatrix::total() const {
  long long sum = 0;
  for (long long c : counts) sum += c;
  return sum;
}

double accuracy(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size()) {
    throw_args("labels and predictions differ in length");
  }
  if (labels.empty()) throw_args("accuracy of an empty sample");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == predictions[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double quadratic_weighted_kappa(const ConfusionMatrix& cm) {
  const int k = cm.k;
  if (k < 2) throw_args("kappa requires k >= 2");
  const double total = static_cast<double>(cm.total());
  if (total <= 0) throw_args("kappa of an empty confusion matrix");

  std::vector<double> row_marginal(static_cast<std::size_t>(k), 0.0);
  std::vector<double> col_marginal(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double o = static_cast<double>(cm.at(i, j)) / total;
      row_marginal[static_cast<std::size_t>(i)] += o;
      col_marginal[static_cast<std::size_t>(j)] += o;
    }
  }

  const double denom_scale = static_cast<double>(k - 1) * static_cast<double>(k - 1);
  double observed = 0.0;
  double expected = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double w = static_cast<double>((i - j) * (i - j)) / denom_scale;
      observed += w * static_cast<double>(cm.at(i, j)) / total;
      expected += w * row_marginal[static_cast<std::size_t>(i)] *
                  col_marginal[static_cast<std::size_t>(j)];
    }
  }
  if (expected <= 0.0) {
    throw_degenerate("kappa undefined: expected weighted disagreement is zero");
  }
  return 1.0 - observed / expected;
}

double brier_score_binary(std::span<const int> labels, std::span<const double> probabilities) {
  if (labels.size() != probabilities.size()) {
    throw_args("labels and probabilities differ in length");
  }
  if (labels.empty()) throw_args("Brier score of an empty sample");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_class_value(labels[i], 2, "label");
    check_probability(probabilities[i]);
    const double diff = probabilities[i] - static_cast<double>(labels[i]);
    sum += diff * diff;
  }
  return sum / static_cast<double>(labels.size());
}

double brier_score_multiclass(std::span<const int> labels,
                              const std::vector<std::vector<double>>& probabilities) {
  if (labels.size() != probabilities.size()) {
    throw_args("labels and probabilities differ in length");
  }
  if (labels.empty()) throw_args("Brier score of an empty sample");
  const std::size_t k = probabilities.front().size();
  if (k < 2) throw_args("Brier score requires k >= 2 probability columns");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::vector<double>& p = probabilities[i];
    if (p.size() != k) throw_args("probability vectors differ in length");
    check_class_value(labels[i], static_cast<int>(k), "label");
    for (std::size_t c = 0; c < k; ++c) {
      check_probability(p[c]);
      const double target = c == static_cast<std::size_t>(labels[i]) ? 1.0 : 0.0;
      const double diff = p[c] - target;
      sum += diff * diff;
    }
  }
  return sum / static_cast<double>(labels.size());
}

std::vector<CalibrationBin> calibration_curve(std::span<const int> labels,
                                              std::span<const double> probabilities,
                                              int n_bins) {
  if (n_bins < 2) throw_args("calibration curve requires at least 2 bins");
  if (labels.size() != probabilities.size()) {
    throw_args("labels and probabilities differ in length");
  }
  if (labels.empty()) throw_args("calibration curve of an empty sample");

  std::vector<CalibrationBin> bins(static_cast<std::size_t>(n_bins));
  std::vector<double> prob_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<long long> positives(static_cast<std::size_t>(n_bins), 0);
  for (int b = 0; b < n_bins; ++b) {
    bins[static_cast<std::size_t>(b)].low = static_cast<double>(b) / n_bins;
    bins[static_cast<std::size_t>(b)].high = static_cast<double>(b + 1) / n_bins;
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_class_value(labels[i], 2, "label");
    check_probability(probabilities[i]);
    int b = static_cast<int>(probabilities[i] * n_bins);
    if (b >= n_bins) b = n_bins - 1;  // p == 1.0 lands in the top bin
    auto idx = static_cast<std::size_t>(b);
    ++bins[idx].count;
    prob_sum[idx] += probabilities[i];
    positives[idx] += labels[i];
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b].count > 0) {
      bins[b].mean_predicted = prob_sum[b] / static_cast<double>(bins[b].count);
      bins[b].empirical_frequency =
          static_cast<double>(positives[b]) / static_cast<double>(bins[b].count);
    } else {
      bins[b].mean_predicted = std::numeric_limits<double>::quiet_NaN();
      bins[b].empirical_frequency = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return bins;
}

}  // namespace repeatlab
