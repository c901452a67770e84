#pragma once

// Classification performance (accuracy, quadratic weighted Cohen's kappa)
// and probability calibration (Brier score, reliability curve).

#include <span>
#include <vector>

namespace repeatlab {

// rows = true class, cols = predicted class.
struct ConfusionMatrix {
  int k = 0;
  std::vector<long long> counts;  // k*k, row-major

  static ConfusionMatrix from_pairs(std::span<const int> labels,
                                    std::span<const int> predictions, int k);

  long long at(int true_class, int predicted_class) const {
    return counts[static_cast<std::size_t>(true_class * k + predicted_class)];
  }
  long long total() const;
};

// Fraction of exact matches. Errors on empty or length-mismatched input.
double accuracy(std::span<const int> labels, std::span<const int> predictions);

// kappa = 1 - sum(w*O) / sum(w*E), w_ij = (i-j)^2 / (k-1)^2, E the outer
// product of the marginals. Errors when the expected weighted disagreement
// is zero (all mass in one class on both sides).
double quadratic_weighted_kappa(const ConfusionMatrix& cm);

// Binary Brier: mean (p - y)^2 over samples.
double brier_score_binary(std::span<const int> labels, std::span<const double> probabilities);

// Multi-class Brier (sum form): mean over samples of sum_c (p_c - 1[y=c])^2.
double brier_score_multiclass(std::span<const int> labels,
                              const std::vector<std::vector<double>>& probabilities);

struct CalibrationBin {
  double low = 0.0;
  double high = 0.0;
  double mean_predicted = 0.0;       // NaN when the bin is empty
  double empirical_frequency = 0.0;  // NaN when the bin is empty
  long long count = 0;
};

// Equal-width reliability curve over [0, 1]. Probabilities are binned by
// value (1.0 lands in the top bin); per-bin mean prediction and positive
// frequency. n_bins >= 2, inputs non-empty and aligned.
std::vector<CalibrationBin> calibration_curve(std::span<const int> labels,
                                              std::span<const double> probabilities,
                                              int n_bins);

}  // namespace repeatlab
