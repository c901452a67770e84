#include "repeatlab/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "repeatlab/errors.hpp"

namespace repeatlab {

AggregatedPrediction aggregate_mc(std::span<const PredictionRecord> rows, int n_use) {
  if (rows.empty()) throw_args("aggregate_mc: no rows");
  const HeadKind head = rows.front().head;
  bool any_deterministic = false;
  bool any_mc = false;
  for (const PredictionRecord& r : rows) {
    if (r.head != head) throw_args("aggregate_mc: rows mix head kinds");
    if (r.subject_id != rows.front().subject_id || r.session_id != rows.front().session_id ||
        r.image_id != rows.front().image_id) {
      throw_args("aggregate_mc: rows belong to different images");
    }
    (r.deterministic() ? any_deterministic : any_mc) = true;
  }
  if (any_deterministic && any_mc) {
    throw_args("aggregate_mc: deterministic and stochastic rows cannot be aggregated together");
  }

  AggregatedPrediction agg;
  agg.head = head;
  if (any_deterministic) {
    if (rows.size() != 1) throw_args("aggregate_mc: multiple deterministic rows for one image");
    agg.outputs = rows.front().outputs;
    agg.n_used = 1;
    agg.deterministic = true;
    return agg;
  }

  if (n_use < 1) throw_args("aggregate_mc: n_use must be at least 1");
  // Select mc_index 0..n_use-1; order in `rows` is irrelevant.
  std::vector<const PredictionRecord*> chosen(static_cast<std::size_t>(n_use), nullptr);
  for (const PredictionRecord& r : rows) {
    if (r.mc_index < n_use) {
      if (chosen[static_cast<std::size_t>(r.mc_index)] != nullptr) {
        throw_args("aggregate_mc: duplicate mc_index " + std::to_string(r.mc_index));
      }
      chosen[static_cast<std::size_t>(r.mc_index)] = &r;
    }
  }
  for (int i = 0; i < n_use; ++i) {
    if (chosen[static_cast<std::size_t>(i)] == nullptr) {
      throw_args("aggregate_mc: image " + rows.front().subject_id + "/" +
                 rows.front().session_id + "/" + rows.front().image_id + " lacks mc_index " +
                 std::to_string(i) + " (need passes 0.." + std::to_string(n_use - 1) + ")");
    }
  }
  agg.outputs.assign(rows.front().outputs.size(), 0.0);
  for (const PredictionRecord* r : chosen) {
    for (std::size_t i = 0; i < agg.outputs.size(); ++i) agg.outputs[i] += r->outputs[i];
  }
  for (double& v : agg.outputs) v /= n_use;
  agg.n_used = n_use;
  agg.deterministic = false;
  return agg;
}

SeverityScore severity_score(const AggregatedPrediction& prediction) {
  const HeadKind& head = prediction.head;
  SeverityScore score;
  score.head = head;
  switch (head.type) {
    case HeadType::binary:
      score.value = prediction.outputs.at(0);
      break;
    case HeadType::multiclass: {
      double expected = 0.0;
      for (std::size_t c = 0; c < prediction.outputs.size(); ++c) {
        expected += prediction.outputs[c] * static_cast<double>(c);
      }
      score.value = expected;
      break;
    }
    case HeadType::ordinal: {
      double total = 0.0;
      for (double p : prediction.outputs) total += p;
      score.value = total;
      break;
    }
    case HeadType::regression:
      score.value = std::clamp(prediction.outputs.at(0), head.range_low(), head.range_high());
      break;
  }
  return score;
}

int assign_class(const AggregatedPrediction& prediction) {
  const HeadKind& head = prediction.head;
  switch (head.type) {
    case HeadType::binary:
      return prediction.outputs.at(0) >= 0.5 ? 1 : 0;
    case HeadType::multiclass: {
      std::size_t best = 0;
      for (std::size_t c = 1; c < prediction.outputs.size(); ++c) {
        if (prediction.outputs[c] > prediction.outputs[best]) best = c;
      }
      return static_cast<int>(best);
    }
    case HeadType::ordinal: {
      int count = 0;
      for (double p : prediction.outputs) count += p > 0.5 ? 1 : 0;
      return count;
    }
    case HeadType::regression: {
      const double score = severity_score(prediction).value;
      const int k = head.num_classes;
      int cls = 0;
      for (int j = 1; j < k; ++j) {
        const double threshold = static_cast<double>(k - 1) * j / k;
        if (score > threshold) ++cls;
      }
      return cls;
    }
  }
  throw_args("invalid head type");
}

double normalize_score(const SeverityScore& score) {
  const double range = score.range_high() - score.range_low();
  return std::clamp((score.value - score.range_low()) / range, 0.0, 1.0);
}

std::map<ImageKey, ImageScore> score_images(const std::vector<SessionGroup>& groups,
                                            bool use_mc, int n_use) {
  std::map<ImageKey, ImageScore> scored;
  for (const SessionGroup& group : groups) {
    for (const ImageRecords& image : group.images) {
      std::vector<PredictionRecord> rows;
      for (const PredictionRecord& r : image.records) {
        if (r.deterministic() != use_mc) rows.push_back(r);
      }
      if (rows.empty()) {
        throw_args(std::string("image ") + group.subject_id + "/" + group.session_id + "/" +
                   image.image_id + " has no " + (use_mc ? "stochastic" : "deterministic") +
                   " rows");
      }
      ImageScore entry;
      entry.prediction = aggregate_mc(rows, n_use);
      entry.score = severity_score(entry.prediction).value;
      entry.assigned_class = assign_class(entry.prediction);
      scored[{group.subject_id, group.session_id, image.image_id}] = std::move(entry);
    }
  }
  return scored;
}

}  // namespace repeatlab
