#include "repeatlab/repeatability.hpp"

#include <algorithm>
#include <cmath>

#include "repeatlab/errors.hpp"

namespace repeatlab {

namespace {

// The image pair a session is judged by: maximal |score difference|, ties
// broken by lexicographic (id_a, id_b) order. Returns indices into `ids`.
template <class Value>
std::pair<std::size_t, std::size_t> select_pair(const std::vector<std::string>& ids,
                                                const std::vector<Value>& values) {
  std::size_t best_a = 0, best_b = 1;
  double best_gap = -1.0;
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = a + 1; b < ids.size(); ++b) {
      const double gap = std::abs(static_cast<double>(values[a]) - static_cast<double>(values[b]));
      if (gap > best_gap) {
        best_gap = gap;
        best_a = a;
        best_b = b;
      }
    }
  }
  return {best_a, best_b};
}

template <class Value>
Value lookup(const std::map<ImageKey, Value>& map, const SessionGroup& group,
             const std::string& image_id, const char* what) {
  const auto it = map.find({group.subject_id, group.session_id, image_id});
  if (it == map.end()) {
    throw_args(std::string("no ") + what + " for image " + group.subject_id + "/" +
               group.session_id + "/" + image_id);
  }
  return it->second;
}

}  // namespace

BlandAltmanResult bland_altman_points(const std::vector<SessionGroup>& groups,
                                      const std::map<ImageKey, double>& scores) {
  BlandAltmanResult result;
  for (const SessionGroup& group : groups) {
    if (group.images.size() < 2) {
      ++result.n_skipped;
      continue;
    }
    // Image ids are unique within a session and sorted by group_by_session;
    // sort defensively so pair order is lexicographic regardless of input.
    std::vector<std::string> ids;
    ids.reserve(group.images.size());
    for (const ImageRecords& image : group.images) ids.push_back(image.image_id);
    std::sort(ids.begin(), ids.end());
    std::vector<double> values;
    values.reserve(ids.size());
    for (const std::string& id : ids) values.push_back(lookup(scores, group, id, "score"));

    const auto [a, b] = select_pair(ids, values);
    BlandAltmanPoint point;
    point.subject_id = group.subject_id;
    point.session_id = group.session_id;
    point.image_lo = ids[a];
    point.image_hi = ids[b];
    point.mean = (values[a] + values[b]) / 2.0;
    point.diff = values[a] - values[b];
    result.points.push_back(std::move(point));
  }
  return result;
}

double percentile_linear(std::span<const double> sorted_values, double q) {
  if (sorted_values.empty()) throw_args("percentile of an empty sample");
  if (q < 0.0 || q > 1.0) throw_args("percentile q must be in [0, 1]");
  const std::size_t n = sorted_values.size();
  if (n == 1) return sorted_values[0];
  const double position = q * static_cast<double>(n - 1);
  const double lower_index = std::floor(position);
  const std::size_t lo = static_cast<std::size_t>(lower_index);
  const double fraction = position - lower_index;
  if (lo + 1 >= n) return sorted_values[n - 1];
  return sorted_values[lo] + fraction * (sorted_values[lo + 1] - sorted_values[lo]);
}

std::pair<double, double> limits_of_agreement(std::span<const double> diffs) {
  if (diffs.size() < 2) throw_args("limits of agreement require at least two differences");
  std::vector<double> sorted(diffs.begin(), diffs.end());
  std::sort(sorted.begin(), sorted.end());
  return {percentile_linear(sorted, 0.025), percentile_linear(sorted, 0.975)};
}

double disagreement_rate(const std::vector<SessionGroup>& groups,
                         const std::map<ImageKey, int>& classes) {
  int eligible = 0;
  int disagreements = 0;
  for (const SessionGroup& group : groups) {
    if (group.images.size() < 2) continue;
    ++eligible;
    const int first = lookup(classes, group, group.images.front().image_id, "class");
    for (const ImageRecords& image : group.images) {
      if (lookup(classes, group, image.image_id, "class") != first) {
        ++disagreements;
        break;
      }
    }
  }
  if (eligible == 0) throw_degenerate("no session has two or more classified images");
  return static_cast<double>(disagreements) / static_cast<double>(eligible);
}

RepeatabilityResult repeatability_summary(const std::vector<SessionGroup>& groups,
                                          const std::map<ImageKey, double>& scores,
                                          const std::map<ImageKey, int>& classes,
                                          double score_range) {
  if (score_range <= 0.0) throw_args("score range must be positive");
  RepeatabilityResult result;
  BlandAltmanResult ba = bland_altman_points(groups, scores);
  result.points = std::move(ba.points);
  result.n_skipped = ba.n_skipped;
  result.n_sessions = static_cast<int>(result.points.size());
  if (result.points.empty()) throw_degenerate("no session has two or more scored images");

  std::vector<double> diffs;
  diffs.reserve(result.points.size());
  for (const BlandAltmanPoint& point : result.points) diffs.push_back(point.diff);
  if (diffs.size() >= 2) {
    const auto [lo, hi] = limits_of_agreement(diffs);
    result.loa_low = lo;
    result.loa_high = hi;
  } else {
    result.loa_low = result.loa_high = diffs.front();
  }
  result.loa_halfwidth_normalized = (result.loa_high - result.loa_low) / (2.0 * score_range);
  result.disagreement = disagreement_rate(groups, classes);
  return result;
}

}  // namespace repeatlab
