#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "repeatlab/metrics.hpp"
#include "repeatlab/records.hpp"
#include "repeatlab/repeatability.hpp"
#include "repeatlab/report.hpp"
#include "repeatlab/scoring.hpp"
#include "repeatlab/simlab.hpp"
#include "test_util.hpp"

using namespace repeatlab;
using namespace repeatlab::simlab;

namespace {

struct Fixture {
  SyntheticCohort cohort;
  RecordSet records;      // multiclass head, 8 passes + deterministic rows
  LabelMap labels;        // multi-level labels of the test split
  EvaluationOptions options;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture built;
    CohortConfig cfg;
    cfg.n_subjects = 40;
    cfg.images_per_subject = 2;
    cfg.k = 3;
    cfg.feature_dim = 5;
    cfg.seed = 88;
    built.cohort = generate_cohort(cfg);

    MlpConfig mlp;
    mlp.input_dim = 5;
    mlp.hidden_sizes = {8};
    mlp.head = HeadKind::multiclass(3);
    mlp.dropout_rate = 0.25;
    const MlpModel model(mlp, 55);
    built.records = predict_records(model, built.cohort, Split::test, 8, 501, true);
    built.labels = cohort_labels(built.cohort, Split::test);

    built.options.n_mc = 8;
    built.options.bootstrap_iters = 60;
    built.options.seed = 3;
    return built;
  }();
  return f;
}

RecordSet regression_records() {
  MlpConfig mlp;
  mlp.input_dim = 5;
  mlp.hidden_sizes = {8};
  mlp.head = HeadKind::regression(3);
  mlp.dropout_rate = 0.25;
  const MlpModel model(mlp, 56);
  return predict_records(model, fixture().cohort, Split::test, 8, 502, true);
}

}  // namespace

TEST_CASE("the evaluation report counts subjects, sessions and images") {
  const Fixture& f = fixture();
  const EvaluationReport report = build_evaluation_report(f.records, f.labels, f.options);

  const std::size_t n_test = f.cohort.subjects_in(Split::test).size();
  CHECK(report.head == HeadKind::multiclass(3));
  CHECK_EQ(report.n_subjects, static_cast<int>(n_test));
  CHECK_EQ(report.n_images, static_cast<int>(n_test * 2));
  CHECK_EQ(report.n_sessions + report.n_skipped_sessions, static_cast<int>(n_test));
  CHECK_EQ(report.points.size(), static_cast<std::size_t>(report.n_sessions));
  CHECK_EQ(report.options.positive_boundary, 1);  // k/2 resolved at build time
  CHECK_EQ(report.options.n_mc, 8);
}

TEST_CASE("report metrics equal the directly computed pipeline values") {
  const Fixture& f = fixture();
  const EvaluationReport report = build_evaluation_report(f.records, f.labels, f.options);

  const std::vector<SessionGroup> groups = group_by_session(f.records);
  const std::map<ImageKey, ImageScore> scored = score_images(groups, true, 8);
  std::map<ImageKey, double> scores;
  std::map<ImageKey, int> classes;
  for (const auto& [key, image_score] : scored) {
    scores[key] = image_score.score;
    classes[key] = image_score.assigned_class;
  }
  const RepeatabilityResult summary = repeatability_summary(groups, scores, classes, 2.0);

  CHECK_EQ(report.loa_low, summary.loa_low);
  CHECK_EQ(report.loa_high, summary.loa_high);
  CHECK_EQ(report.loa_halfwidth_normalized.value, summary.loa_halfwidth_normalized);
  CHECK_EQ(report.disagreement.value, summary.disagreement);
  REQUIRE_EQ(report.points.size(), summary.points.size());
  for (std::size_t i = 0; i < summary.points.size(); ++i) {
    CHECK_EQ(report.points[i].subject_id, summary.points[i].subject_id);
    CHECK_EQ(report.points[i].diff, summary.points[i].diff);
  }

  // Accuracy, kappa and the calibration inputs in group-then-image order.
  std::vector<int> label_vec;
  std::vector<int> class_vec;
  std::vector<int> positive_labels;
  std::vector<double> positive_probs;
  double brier_total = 0.0;
  for (const SessionGroup& group : groups) {
    for (const ImageRecords& image : group.images) {
      const ImageKey key{group.subject_id, group.session_id, image.image_id};
      const int label = f.labels.at(key);
      const ImageScore& image_score = scored.at(key);
      label_vec.push_back(label);
      class_vec.push_back(image_score.assigned_class);
      positive_labels.push_back(label >= 1 ? 1 : 0);
      double positive = 0.0;
      for (std::size_t c = 1; c < image_score.prediction.outputs.size(); ++c) {
        positive += image_score.prediction.outputs[c];
      }
      positive_probs.push_back(positive);
      double term = 0.0;
      for (std::size_t c = 0; c < image_score.prediction.outputs.size(); ++c) {
        const double diff =
            image_score.prediction.outputs[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
        term += diff * diff;
      }
      brier_total += term;
    }
  }
  CHECK_EQ(report.accuracy.value, accuracy(label_vec, class_vec));
  CHECK_EQ(report.kappa.value,
           quadratic_weighted_kappa(ConfusionMatrix::from_pairs(label_vec, class_vec, 3)));
  REQUIRE(report.brier.has_value());
  CHECK_EQ(report.brier->value, brier_total / static_cast<double>(label_vec.size()));

  const std::vector<CalibrationBin> curve = calibration_curve(positive_labels, positive_probs, 10);
  REQUIRE_EQ(report.calibration.size(), curve.size());
  for (std::size_t b = 0; b < curve.size(); ++b) {
    CHECK_EQ(report.calibration[b].count, curve[b].count);
    if (curve[b].count > 0) {
      CHECK_EQ(report.calibration[b].mean_predicted, curve[b].mean_predicted);
      CHECK_EQ(report.calibration[b].empirical_frequency, curve[b].empirical_frequency);
    }
  }
}

TEST_CASE("confidence bounds are the percentiles of the stored samples") {
  const Fixture& f = fixture();
  const EvaluationReport report = build_evaluation_report(f.records, f.labels, f.options);
  for (const MetricSummary* metric :
       {&report.loa_halfwidth_normalized, &report.disagreement, &report.accuracy, &report.kappa,
        &*report.brier}) {
    REQUIRE_EQ(metric->samples.size(), 60);
    std::vector<double> sorted = metric->samples;
    std::sort(sorted.begin(), sorted.end());
    CHECK_EQ(metric->ci_low, percentile_linear(sorted, 0.025));
    CHECK_EQ(metric->ci_high, percentile_linear(sorted, 0.975));
    CHECK_LE(metric->ci_low, metric->ci_high);
  }
}

// Serializing writes floats at 9 significant digits and derives the width
// fields from the agreement limits, so a freshly parsed report can differ
// from the in-memory one in the last printed digit. From the first parse
// onward the text must be a fixed point.
static std::string reserialized(const std::string& text) {
  return report_to_json(report_from_json(text));
}

TEST_CASE("report JSON is stable across parse cycles") {
  const Fixture& f = fixture();
  const EvaluationReport report = build_evaluation_report(f.records, f.labels, f.options);
  const std::string text = report_to_json(report);
  const std::string once = reserialized(text);
  CHECK_EQ(reserialized(once), once);

  const EvaluationReport parsed = report_from_json(text);
  CHECK_EQ(parsed.head.type, report.head.type);
  CHECK_EQ(parsed.head.num_classes, report.head.num_classes);
  CHECK_EQ(parsed.options.use_mc, report.options.use_mc);
  CHECK_EQ(parsed.options.n_mc, report.options.n_mc);
  CHECK_EQ(parsed.n_subjects, report.n_subjects);
  CHECK_EQ(parsed.n_sessions, report.n_sessions);
  CHECK_EQ(parsed.n_images, report.n_images);
  CHECK_EQ(parsed.points.size(), report.points.size());
  CHECK_EQ(parsed.loa_low, doctest::Approx(report.loa_low).epsilon(1e-8));
  CHECK_EQ(parsed.loa_high, doctest::Approx(report.loa_high).epsilon(1e-8));
  REQUIRE(parsed.brier.has_value());
  const std::vector<std::pair<const MetricSummary*, const MetricSummary*>> metrics = {
      {&parsed.loa_halfwidth_normalized, &report.loa_halfwidth_normalized},
      {&parsed.disagreement, &report.disagreement},
      {&parsed.accuracy, &report.accuracy},
      {&parsed.kappa, &report.kappa},
      {&*parsed.brier, &*report.brier},
  };
  for (const auto& [from_text, original] : metrics) {
    CHECK_EQ(from_text->value, doctest::Approx(original->value).epsilon(1e-8));
    CHECK_EQ(from_text->ci_low, doctest::Approx(original->ci_low).epsilon(1e-8));
    CHECK_EQ(from_text->ci_high, doctest::Approx(original->ci_high).epsilon(1e-8));
    REQUIRE_EQ(from_text->samples.size(), original->samples.size());
  }
  CHECK_EQ(parsed.calibration.size(), report.calibration.size());

  testutil::TempDir dir("report_roundtrip");
  const auto paths = write_report_files(report, dir.path(), "_mc");
  REQUIRE_EQ(paths.size(), 3);
  CHECK_EQ(paths[0].filename().string(), "report_mc.json");
  CHECK_EQ(paths[1].filename().string(), "bland_altman_mc.csv");
  CHECK_EQ(paths[2].filename().string(), "calibration_mc.csv");
  CHECK_EQ(testutil::read_file(paths[0]), text);
  CHECK_EQ(report_to_json(load_report(paths[0])), once);

  const std::string ba = testutil::read_file(paths[1]);
  CHECK(ba.rfind("subject_id,session_id,mean,diff\n", 0) == 0);
  CHECK_EQ(static_cast<std::size_t>(std::count(ba.begin(), ba.end(), '\n')),
           1 + report.points.size());
  const std::string cal = testutil::read_file(paths[2]);
  CHECK(cal.rfind("bin_low,bin_high,mean_predicted,empirical_frequency,count\n", 0) == 0);
  CHECK_EQ(static_cast<std::size_t>(std::count(cal.begin(), cal.end(), '\n')),
           1 + report.calibration.size());
}

TEST_CASE("identical inputs rebuild an identical report") {
  const Fixture& f = fixture();
  const EvaluationReport a = build_evaluation_report(f.records, f.labels, f.options);
  const EvaluationReport b = build_evaluation_report(f.records, f.labels, f.options);
  CHECK_EQ(report_to_json(a), report_to_json(b));

  EvaluationOptions other = f.options;
  other.seed = 4;
  const EvaluationReport c = build_evaluation_report(f.records, f.labels, other);
  CHECK_NE(a.loa_halfwidth_normalized.samples, c.loa_halfwidth_normalized.samples);
  CHECK_EQ(a.loa_halfwidth_normalized.value, c.loa_halfwidth_normalized.value);
}

TEST_CASE("a report compared against itself shows no differences") {
  const Fixture& f = fixture();
  const EvaluationReport report = build_evaluation_report(f.records, f.labels, f.options);
  const ReportComparison comparison = compare_reports(report, report);
  CHECK_EQ(comparison.alpha, 0.05);
  REQUIRE_EQ(comparison.metrics.size(), 5);
  CHECK_EQ(comparison.metrics[0].metric, "loa_halfwidth_normalized");
  CHECK_EQ(comparison.metrics[1].metric, "disagreement");
  CHECK_EQ(comparison.metrics[2].metric, "accuracy");
  CHECK_EQ(comparison.metrics[3].metric, "kappa");
  CHECK_EQ(comparison.metrics[4].metric, "brier");
  for (const MetricComparison& metric : comparison.metrics) {
    CHECK_EQ(metric.value_a, metric.value_b);
    CHECK_EQ(metric.statistic, 0.0);
    CHECK_EQ(metric.p_value, 1.0);
    CHECK_FALSE(metric.significant);
  }
  const std::string json_text = comparison_to_json(comparison);
  CHECK(json_text.find("\"alpha\": 0.05") != std::string::npos);

  CHECK_EQ(testutil::error_code_of([&] { compare_reports(report, report, 1.5); }), "args");
}

TEST_CASE("regression reports drop the calibration metrics") {
  const Fixture& f = fixture();
  const RecordSet reg = regression_records();
  const EvaluationReport report = build_evaluation_report(reg, f.labels, f.options);
  CHECK_FALSE(report.brier.has_value());
  CHECK(report.calibration.empty());
  CHECK_EQ(report.options.positive_boundary, -1);

  testutil::TempDir dir("report_regression");
  const auto paths = write_report_files(report, dir.path());
  REQUIRE_EQ(paths.size(), 2);
  CHECK_EQ(paths[0].filename().string(), "report.json");
  CHECK_EQ(paths[1].filename().string(), "bland_altman.csv");
  CHECK_EQ(report_to_json(load_report(paths[0])), reserialized(report_to_json(report)));
  CHECK_FALSE(load_report(paths[0]).brier.has_value());

  // A calibrated and an uncalibrated report cannot be compared.
  const EvaluationReport calibrated = build_evaluation_report(f.records, f.labels, f.options);
  const std::string msg =
      testutil::error_message_of([&] { compare_reports(calibrated, report); });
  CHECK(msg.find("mismatched") != std::string::npos);
}

TEST_CASE("deterministic-mode reports evaluate the single-pass rows") {
  const Fixture& f = fixture();
  EvaluationOptions options = f.options;
  options.use_mc = false;
  const EvaluationReport report = build_evaluation_report(f.records, f.labels, options);

  const std::vector<SessionGroup> groups = group_by_session(f.records);
  const std::map<ImageKey, ImageScore> scored = score_images(groups, false, 1);
  std::map<ImageKey, double> scores;
  std::map<ImageKey, int> classes;
  for (const auto& [key, image_score] : scored) {
    scores[key] = image_score.score;
    classes[key] = image_score.assigned_class;
  }
  const RepeatabilityResult summary = repeatability_summary(groups, scores, classes, 2.0);
  CHECK_EQ(report.loa_halfwidth_normalized.value, summary.loa_halfwidth_normalized);
  CHECK_EQ(report.disagreement.value, summary.disagreement);

  const std::string text = report_to_json(report);
  CHECK(text.find("\"mode\": \"deterministic\"") != std::string::npos);
  const std::string once = reserialized(text);
  CHECK_EQ(reserialized(once), once);
  CHECK_FALSE(report_from_json(text).options.use_mc);
}

TEST_CASE("report preconditions and label coverage are enforced") {
  const Fixture& f = fixture();

  EvaluationOptions bad = f.options;
  bad.positive_boundary = 7;
  CHECK_EQ(testutil::error_code_of([&] { build_evaluation_report(f.records, f.labels, bad); }),
           "args");

  bad = f.options;
  bad.bootstrap_iters = 1;
  CHECK_EQ(testutil::error_code_of([&] { build_evaluation_report(f.records, f.labels, bad); }),
           "args");

  bad = f.options;
  bad.n_mc = 0;
  CHECK_EQ(testutil::error_code_of([&] { build_evaluation_report(f.records, f.labels, bad); }),
           "args");

  // A label missing for one image names that image.
  LabelMap incomplete = f.labels;
  const ImageKey victim = incomplete.begin()->first;
  incomplete.erase(incomplete.begin());
  const std::string msg = testutil::error_message_of(
      [&] { build_evaluation_report(f.records, incomplete, f.options); });
  CHECK(msg.find("missing labels") != std::string::npos);
  CHECK(msg.find(victim.subject_id + "/" + victim.session_id + "/" + victim.image_id) !=
        std::string::npos);

  // A label outside [0, k-1] names the range.
  LabelMap out_of_range = f.labels;
  out_of_range.begin()->second = 9;
  const std::string range_msg = testutil::error_message_of(
      [&] { build_evaluation_report(f.records, out_of_range, f.options); });
  CHECK(range_msg.find("outside") != std::string::npos);
}

TEST_CASE("binary heads pin the positive boundary to class 1") {
  const Fixture& f = fixture();
  MlpConfig mlp;
  mlp.input_dim = 5;
  mlp.hidden_sizes = {8};
  mlp.head = HeadKind::binary();
  mlp.dropout_rate = 0.25;
  const MlpModel model(mlp, 57);
  const RecordSet records = predict_records(model, f.cohort, Split::test, 8, 503, true);
  const LabelMap labels = cohort_labels(f.cohort, Split::test, 1);

  EvaluationOptions options = f.options;
  options.positive_boundary = 5;  // ignored for binary heads
  const EvaluationReport report = build_evaluation_report(records, labels, options);
  CHECK_EQ(report.options.positive_boundary, 1);
  REQUIRE(report.brier.has_value());

  // The binary Brier equals the binary closed form over those probabilities.
  const std::vector<SessionGroup> groups = group_by_session(records);
  const std::map<ImageKey, ImageScore> scored = score_images(groups, true, 8);
  std::vector<int> label_vec;
  std::vector<double> prob_vec;
  for (const SessionGroup& group : groups) {
    for (const ImageRecords& image : group.images) {
      const ImageKey key{group.subject_id, group.session_id, image.image_id};
      label_vec.push_back(labels.at(key));
      prob_vec.push_back(scored.at(key).prediction.outputs[0]);
    }
  }
  CHECK_EQ(report.brier->value,
           doctest::Approx(brier_score_binary(label_vec, prob_vec)).epsilon(1e-12));
}
