#pragma once

// Evaluation reports: the five headline metrics (normalized limits-of-
// agreement half-width, disagreement rate, accuracy, quadratic weighted
// kappa, Brier score), each with a bootstrap 95% confidence interval, plus
// Bland-Altman points and the reliability curve. Reports serialize to
// byte-stable JSON (fixed key order, 9-significant-digit floats) and two
// reports can be compared metric-by-metric with Welch's t-test on their
// bootstrap sample vectors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "repeatlab/metrics.hpp"
#include "repeatlab/records.hpp"
#include "repeatlab/repeatability.hpp"

namespace repeatlab {

struct EvaluationOptions {
  bool use_mc = true;  // average stochastic passes; false evaluates the deterministic rows
  int n_mc = 50;       // passes averaged per image when use_mc
  int bootstrap_iters = 500;
  int calibration_bins = 10;
  std::uint64_t seed = 0;  // drives the bootstrap substreams
  // Positive group for calibration and the Brier binarization on k > 2
  // heads: classes >= positive_boundary count as positive. -1 selects k/2.
  // Ignored for binary (class 1 is positive) and regression (no calibration).
  int positive_boundary = -1;
};

// A metric value with its bootstrap distribution. ci bounds are the
// empirical 2.5th / 97.5th percentiles of `samples`.
struct MetricSummary {
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> samples;
};

struct EvaluationReport {
  HeadKind head;
  EvaluationOptions options;  // positive_boundary stored resolved (or -1 when unused)
  int n_subjects = 0;
  int n_sessions = 0;  // sessions eligible for pairing (>= 2 scored images)
  int n_images = 0;
  int n_skipped_sessions = 0;

  std::vector<BlandAltmanPoint> points;
  double loa_low = 0.0;   // empirical 2.5th percentile of the differences
  double loa_high = 0.0;  // empirical 97.5th percentile
  MetricSummary loa_halfwidth_normalized;
  MetricSummary disagreement;
  MetricSummary accuracy;
  MetricSummary kappa;

  // Calibration; absent for regression heads (no probabilistic output).
  std::optional<MetricSummary> brier;
  std::vector<CalibrationBin> calibration;

  double loa_width() const { return loa_high - loa_low; }
  double loa_halfwidth() const { return loa_width() / 2.0; }
  double loa_max_abs() const;
};

// Full pipeline over one record set: aggregate (MC average or deterministic
// row), score, pair, and bootstrap every headline metric with the session
// group as the resampling unit. Labels must cover every scored image.
EvaluationReport build_evaluation_report(const RecordSet& records, const LabelMap& labels,
                                         const EvaluationOptions& options);

// Byte-stable serialization round trip.
std::string report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const std::string& text);
EvaluationReport load_report(const std::filesystem::path& path);

// Files written next to each other: report<suffix>.json,
// bland_altman<suffix>.csv (`subject_id,session_id,mean,diff`) and, when the
// report carries calibration, calibration<suffix>.csv. Returns the paths.
std::vector<std::filesystem::path> write_report_files(const EvaluationReport& report,
                                                      const std::filesystem::path& directory,
                                                      const std::string& suffix = "");

// Welch's t-test per metric over the two reports' bootstrap samples.
struct MetricComparison {
  std::string metric;
  double value_a = 0.0;
  double value_b = 0.0;
  double statistic = 0.0;
  double p_value = 1.0;
  bool significant = false;  // p < alpha
};

struct ReportComparison {
  double alpha = 0.05;
  std::vector<MetricComparison> metrics;
};

// Both reports must expose the same metric set (a calibrated and an
// uncalibrated report cannot be compared). Unequal bootstrap iteration
// counts are fine.
ReportComparison compare_reports(const EvaluationReport& a, const EvaluationReport& b,
                                 double alpha = 0.05);

std::string comparison_to_json(const ReportComparison& comparison);

}  // namespace repeatlab
