#pragma once

// Test-retest agreement between repeated sessions of the same subject,
// in the Bland-Altman style: per-session score differences, non-parametric
// 95% limits of agreement, and the categorical disagreement rate.

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "repeatlab/records.hpp"

namespace repeatlab {

// One Bland-Altman point per eligible session: the mean and signed
// difference of two per-image severity scores from the same session.
// With more than two images the pair with the largest absolute difference
// is taken (ties broken by lexicographic image-id pair order), and the
// difference is signed as score(lower image_id) - score(higher image_id).
struct BlandAltmanPoint {
  std::string subject_id;
  std::string session_id;
  std::string image_lo;  // lexicographically smaller id of the pair
  std::string image_hi;
  double mean = 0.0;  // mean of the two selected scores
  double diff = 0.0;  // score(image_lo) - score(image_hi)
};

struct BlandAltmanResult {
  std::vector<BlandAltmanPoint> points;
  int n_skipped = 0;  // sessions with fewer than two scored images
};

// `scores` maps every scored image to its severity score; sessions whose
// images are missing from the map are an error, sessions with a single image
// are skipped and counted.
BlandAltmanResult bland_altman_points(const std::vector<SessionGroup>& groups,
                                      const std::map<ImageKey, double>& scores);

// Linear-interpolation percentile of a sorted sample: rank position
// q * (n - 1) in zero-based index space. q in [0, 1], sample non-empty.
double percentile_linear(std::span<const double> sorted_values, double q);

// Non-parametric 95% limits of agreement: the empirical 2.5th and 97.5th
// percentiles of the differences. Requires at least two differences.
std::pair<double, double> limits_of_agreement(std::span<const double> diffs);

// Fraction of eligible sessions in which not all images receive the same
// class. Skips single-image sessions; errors if none eligible.
double disagreement_rate(const std::vector<SessionGroup>& groups,
                         const std::map<ImageKey, int>& classes);

// Everything the evaluation report needs about repeatability.
struct RepeatabilityResult {
  std::vector<BlandAltmanPoint> points;
  int n_sessions = 0;      // eligible sessions (= points.size())
  int n_skipped = 0;
  double loa_low = 0.0;
  double loa_high = 0.0;
  // Half the LoA interval width, normalized by the score range: the
  // headline "limits of agreement" number, comparable across heads.
  double loa_halfwidth_normalized = 0.0;
  double disagreement = 0.0;
};

RepeatabilityResult repeatability_summary(const std::vector<SessionGroup>& groups,
                                          const std::map<ImageKey, double>& scores,
                                          const std::map<ImageKey, int>& classes,
                                          double score_range);

}  // namespace repeatlab
