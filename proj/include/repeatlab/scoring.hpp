#pragma once

// Turning raw per-pass outputs into a single per-image prediction:
// average the stochastic passes (or take the one deterministic pass), then
// reduce to a scalar severity score and a hard class.

#include <map>
#include <span>
#include <vector>

#include "repeatlab/records.hpp"

namespace repeatlab {

// Element-wise average of the first `n_use` stochastic passes of one image
// (or the single deterministic pass, in which case n_use is ignored).
struct AggregatedPrediction {
  HeadKind head;
  std::vector<double> outputs;
  // Number of passes averaged; 1 for a deterministic input.
  int n_used = 0;
  bool deterministic = false;
};

// `rows` must all belong to one image and one head. Stochastic inputs must
// contain mc_index 0..n_use-1 (more is fine; the first n_use by mc_index are
// used). A deterministic row must be the only row. n_use >= 1.
AggregatedPrediction aggregate_mc(std::span<const PredictionRecord> rows, int n_use);

// Scalar severity of an aggregated prediction:
//   binary      - the positive-class probability itself, in [0, 1]
//   multiclass  - expected class index, sum_c p_c * c, in [0, k-1]
//   ordinal     - sum of the k-1 cumulative probabilities, in [0, k-1]
//   regression  - the raw output, clamped to [0, k-1]
struct SeverityScore {
  double value = 0.0;
  HeadKind head;

  double range_low() const { return head.range_low(); }
  double range_high() const { return head.range_high(); }
};

SeverityScore severity_score(const AggregatedPrediction& prediction);

// Hard class in [0, k-1]:
//   binary      - score >= 0.5
//   multiclass  - argmax probability (lowest index wins ties)
//   ordinal     - count of cumulative probabilities > 0.5
//   regression  - count of thresholds t_j = (k-1) * j / k (j = 1..k-1)
//                 strictly below the score; a score exactly on a threshold
//                 falls in the lower class
int assign_class(const AggregatedPrediction& prediction);

// Severity rescaled to [0, 1] by the head's score range, clamped to [0, 1].
double normalize_score(const SeverityScore& score);

// Convenience for whole-cohort evaluation: aggregate every image of every
// session group and return its severity score and class. When `use_mc` is
// true the stochastic rows are aggregated with `n_use` passes; otherwise the
// deterministic row is used (error if an image lacks the required rows).
struct ImageScore {
  double score = 0.0;
  int assigned_class = 0;
  AggregatedPrediction prediction;
};

std::map<ImageKey, ImageScore> score_images(const std::vector<SessionGroup>& groups,
                                            bool use_mc, int n_use);

}  // namespace repeatlab
