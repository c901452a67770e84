#include "repeatlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "repeatlab/errors.hpp"
#include "repeatlab/jsonio.hpp"
#include "repeatlab/scoring.hpp"
#include "repeatlab/stats.hpp"

namespace repeatlab {

namespace {

constexpr const char* kReportSchema = "repeatlab/report/v1";
constexpr const char* kCompareSchema = "repeatlab/compare/v1";

// Bootstrap substreams, one per metric, derived from the report seed.
constexpr std::uint64_t kStreamDisagreement = 101;
constexpr std::uint64_t kStreamLoa = 102;
constexpr std::uint64_t kStreamKappa = 103;
constexpr std::uint64_t kStreamAccuracy = 104;
constexpr std::uint64_t kStreamBrier = 105;

// Per-class probabilities from k-1 cumulative ones: p_c = P(y > c-1) - P(y > c).
std::vector<double> ordinal_class_probabilities(std::span<const double> cumulative) {
  const std::size_t k = cumulative.size() + 1;
  std::vector<double> probs(k);
  probs[0] = 1.0 - cumulative[0];
  for (std::size_t c = 1; c + 1 < k; ++c) probs[c] = cumulative[c - 1] - cumulative[c];
  probs[k - 1] = cumulative[k - 2];
  for (double& p : probs) p = std::max(p, 0.0);
  return probs;
}

double positive_probability(const AggregatedPrediction& prediction, int boundary) {
  switch (prediction.head.type) {
    case HeadType::binary:
      return prediction.outputs[0];
    case HeadType::multiclass: {
      double total = 0.0;
      for (std::size_t c = static_cast<std::size_t>(boundary); c < prediction.outputs.size(); ++c) {
        total += prediction.outputs[c];
      }
      return total;
    }
    case HeadType::ordinal:
      // The cumulative unit at rank boundary-1 is P(class >= boundary).
      return prediction.outputs[static_cast<std::size_t>(boundary - 1)];
    case HeadType::regression:
      break;
  }
  throw_args("no positive-class probability for this head");
}

double brier_term(const AggregatedPrediction& prediction, int label) {
  switch (prediction.head.type) {
    case HeadType::binary: {
      const double diff = prediction.outputs[0] - static_cast<double>(label);
      return diff * diff;
    }
    case HeadType::multiclass: {
      double total = 0.0;
      for (std::size_t c = 0; c < prediction.outputs.size(); ++c) {
        const double diff =
            prediction.outputs[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
        total += diff * diff;
      }
      return total;
    }
    case HeadType::ordinal: {
      const std::vector<double> probs = ordinal_class_probabilities(prediction.outputs);
      double total = 0.0;
      for (std::size_t c = 0; c < probs.size(); ++c) {
        const double diff = probs[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
        total += diff * diff;
      }
      return total;
    }
    case HeadType::regression:
      break;
  }
  throw_args("no Brier score for this head");
}

struct GroupEval {
  bool eligible = false;  // has a Bland-Altman point
  double diff = 0.0;
  bool disagrees = false;
  std::vector<int> labels;
  std::vector<int> classes;
  std::vector<double> brier_terms;  // empty for regression heads
};

MetricSummary to_summary(const BootstrapResult& result) {
  return {result.point_estimate, result.ci_low, result.ci_high, result.samples};
}

void write_metric(JsonWriter& w, const MetricSummary& metric) {
  w.begin_object();
  w.key("value").value(metric.value);
  w.key("ci_low").value(metric.ci_low);
  w.key("ci_high").value(metric.ci_high);
  w.key("samples").begin_array(true);
  for (double s : metric.samples) w.value(s);
  w.end_array();
  w.end_object();
}

// --- parsing helpers (schema errors name the offending key) ---------------

using nlohmann::json;

const json& member(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw_schema(std::string("report: missing key '") + key + "'");
  return *it;
}

double number_field(const json& j, const char* key) {
  const json& v = member(j, key);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) throw_schema(std::string("report: '") + key + "' is not a number");
  return v.get<double>();
}

int int_field(const json& j, const char* key) {
  const json& v = member(j, key);
  if (!v.is_number_integer()) throw_schema(std::string("report: '") + key + "' is not an integer");
  return v.get<int>();
}

std::string string_field(const json& j, const char* key) {
  const json& v = member(j, key);
  if (!v.is_string()) throw_schema(std::string("report: '") + key + "' is not a string");
  return v.get<std::string>();
}

MetricSummary metric_field(const json& j, const char* key) {
  const json& v = member(j, key);
  if (!v.is_object()) throw_schema(std::string("report: '") + key + "' is not an object");
  MetricSummary metric;
  metric.value = number_field(v, "value");
  metric.ci_low = number_field(v, "ci_low");
  metric.ci_high = number_field(v, "ci_high");
  const json& samples = member(v, "samples");
  if (!samples.is_array()) throw_schema(std::string("report: '") + key + ".samples' is not an array");
  for (const json& s : samples) {
    if (!s.is_number()) throw_schema(std::string("report: '") + key + ".samples' holds a non-number");
    metric.samples.push_back(s.get<double>());
  }
  return metric;
}

}  // namespace

double EvaluationReport::loa_max_abs() const {
  return std::max(std::abs(loa_low), std::abs(loa_high));
}

EvaluationReport build_evaluation_report(const RecordSet& records, const LabelMap& labels,
                                         const EvaluationOptions& options) {
  if (records.empty()) throw_args("no records to evaluate");
  if (options.use_mc && options.n_mc < 1) throw_args("n_mc must be positive");
  if (options.bootstrap_iters < 2) throw_args("bootstrap_iters must be at least 2");
  if (options.calibration_bins < 2) throw_args("calibration_bins must be at least 2");

  const HeadKind head = *records.head();
  const double range = head.range_high() - head.range_low();
  const bool calibrated = head.type != HeadType::regression;
  int boundary = -1;
  if (calibrated) {
    boundary = head.type == HeadType::binary
                   ? 1
                   : (options.positive_boundary < 0 ? head.num_classes / 2
                                                    : options.positive_boundary);
    if (boundary < 1 || boundary > head.num_classes - 1) {
      throw_args("positive_boundary must be in [1, k-1]");
    }
  }

  const std::vector<SessionGroup> groups = group_by_session(records);
  const std::map<ImageKey, ImageScore> scored =
      score_images(groups, options.use_mc, options.n_mc);
  std::map<ImageKey, double> scores;
  std::map<ImageKey, int> classes;
  for (const auto& [key, image_score] : scored) {
    scores[key] = image_score.score;
    classes[key] = image_score.assigned_class;
  }
  const RepeatabilityResult summary = repeatability_summary(groups, scores, classes, range);

  std::map<std::pair<std::string, std::string>, const BlandAltmanPoint*> point_by_session;
  for (const BlandAltmanPoint& point : summary.points) {
    point_by_session[{point.subject_id, point.session_id}] = &point;
  }

  std::vector<GroupEval> evals(groups.size());
  std::set<std::string> subject_ids;
  std::vector<int> positive_labels;
  std::vector<double> positive_probs;
  std::vector<std::string> missing;
  int n_images = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const SessionGroup& group = groups[g];
    GroupEval& eval = evals[g];
    subject_ids.insert(group.subject_id);
    if (const auto it = point_by_session.find({group.subject_id, group.session_id});
        it != point_by_session.end()) {
      eval.eligible = true;
      eval.diff = it->second->diff;
    }
    for (const ImageRecords& image : group.images) {
      const ImageKey key{group.subject_id, group.session_id, image.image_id};
      const auto label_it = labels.find(key);
      if (label_it == labels.end()) {
        missing.push_back(group.subject_id + "/" + group.session_id + "/" + image.image_id);
        continue;
      }
      const int label = label_it->second;
      if (label < 0 || label >= head.num_classes) {
        throw_args("label " + std::to_string(label) + " for image " + group.subject_id + "/" +
                   group.session_id + "/" + image.image_id + " outside [0, " +
                   std::to_string(head.num_classes - 1) + "]");
      }
      const ImageScore& image_score = scored.at(key);
      eval.labels.push_back(label);
      eval.classes.push_back(image_score.assigned_class);
      if (calibrated) {
        eval.brier_terms.push_back(brier_term(image_score.prediction, label));
        positive_probs.push_back(positive_probability(image_score.prediction, boundary));
        positive_labels.push_back(label >= boundary ? 1 : 0);
      }
      ++n_images;
    }
    if (eval.eligible) {
      eval.disagrees = std::any_of(eval.classes.begin(), eval.classes.end(),
                                   [&](int c) { return c != eval.classes.front(); });
    }
  }
  if (!missing.empty()) {
    std::string joined;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) {
      if (i) joined += ", ";
      joined += missing[i];
    }
    if (missing.size() > 10) joined += ", ...";
    throw_args("images missing labels: " + joined);
  }

  const auto loa_metric = [&](std::span<const std::size_t> indices) {
    std::vector<double> diffs;
    for (std::size_t i : indices) {
      if (evals[i].eligible) diffs.push_back(evals[i].diff);
    }
    if (diffs.size() < 2) throw_degenerate("fewer than two paired sessions in resample");
    const auto [lo, hi] = limits_of_agreement(diffs);
    return (hi - lo) / (2.0 * range);
  };
  const auto disagreement_metric = [&](std::span<const std::size_t> indices) {
    long long eligible = 0;
    long long disagreeing = 0;
    for (std::size_t i : indices) {
      if (!evals[i].eligible) continue;
      ++eligible;
      if (evals[i].disagrees) ++disagreeing;
    }
    if (eligible == 0) throw_degenerate("no eligible session in resample");
    return static_cast<double>(disagreeing) / static_cast<double>(eligible);
  };
  const auto accuracy_metric = [&](std::span<const std::size_t> indices) {
    long long correct = 0;
    long long total = 0;
    for (std::size_t i : indices) {
      const GroupEval& eval = evals[i];
      for (std::size_t s = 0; s < eval.labels.size(); ++s) {
        correct += eval.labels[s] == eval.classes[s] ? 1 : 0;
        ++total;
      }
    }
    if (total == 0) throw_degenerate("no labeled image in resample");
    return static_cast<double>(correct) / static_cast<double>(total);
  };
  const auto kappa_metric = [&](std::span<const std::size_t> indices) {
    std::vector<int> resample_labels;
    std::vector<int> resample_classes;
    for (std::size_t i : indices) {
      const GroupEval& eval = evals[i];
      resample_labels.insert(resample_labels.end(), eval.labels.begin(), eval.labels.end());
      resample_classes.insert(resample_classes.end(), eval.classes.begin(), eval.classes.end());
    }
    if (resample_labels.empty()) throw_degenerate("no labeled image in resample");
    return quadratic_weighted_kappa(
        ConfusionMatrix::from_pairs(resample_labels, resample_classes, head.num_classes));
  };
  const auto brier_metric = [&](std::span<const std::size_t> indices) {
    double total = 0.0;
    long long count = 0;
    for (std::size_t i : indices) {
      for (double term : evals[i].brier_terms) {
        total += term;
        ++count;
      }
    }
    if (count == 0) throw_degenerate("no labeled image in resample");
    return total / static_cast<double>(count);
  };

  EvaluationReport report;
  report.head = head;
  report.options = options;
  report.options.positive_boundary = boundary;
  report.n_subjects = static_cast<int>(subject_ids.size());
  report.n_sessions = summary.n_sessions;
  report.n_images = n_images;
  report.n_skipped_sessions = summary.n_skipped;
  report.points = summary.points;
  report.loa_low = summary.loa_low;
  report.loa_high = summary.loa_high;

  const std::size_t n_units = evals.size();
  const int iters = options.bootstrap_iters;
  report.disagreement = to_summary(bootstrap_metric_indices(
      n_units, disagreement_metric, iters, derive_stream(options.seed, kStreamDisagreement)));
  report.loa_halfwidth_normalized = to_summary(bootstrap_metric_indices(
      n_units, loa_metric, iters, derive_stream(options.seed, kStreamLoa)));
  report.kappa = to_summary(bootstrap_metric_indices(
      n_units, kappa_metric, iters, derive_stream(options.seed, kStreamKappa)));
  report.accuracy = to_summary(bootstrap_metric_indices(
      n_units, accuracy_metric, iters, derive_stream(options.seed, kStreamAccuracy)));
  if (calibrated) {
    report.brier = to_summary(bootstrap_metric_indices(
        n_units, brier_metric, iters, derive_stream(options.seed, kStreamBrier)));
    report.calibration = calibration_curve(positive_labels, positive_probs,
                                           options.calibration_bins);
  }
  return report;
}

std::string report_to_json(const EvaluationReport& report) {
  JsonWriter w;
  w.begin_object();
  w.key("schema").value(kReportSchema);

  w.key("head").begin_object();
  w.key("type").value(report.head.name());
  w.key("k").value(report.head.num_classes);
  w.end_object();

  w.key("aggregation").begin_object();
  w.key("mode").value(report.options.use_mc ? "mc" : "deterministic");
  w.key("n_mc");
  if (report.options.use_mc) {
    w.value(report.options.n_mc);
  } else {
    w.null();
  }
  w.end_object();

  w.key("options").begin_object();
  w.key("bootstrap_iters").value(report.options.bootstrap_iters);
  w.key("calibration_bins").value(report.options.calibration_bins);
  w.key("seed").value(static_cast<std::uint64_t>(report.options.seed));
  w.key("positive_boundary");
  if (report.brier.has_value()) {
    w.value(report.options.positive_boundary);
  } else {
    w.null();
  }
  w.end_object();

  w.key("counts").begin_object();
  w.key("n_subjects").value(report.n_subjects);
  w.key("n_sessions").value(report.n_sessions);
  w.key("n_images").value(report.n_images);
  w.key("n_skipped_sessions").value(report.n_skipped_sessions);
  w.end_object();

  w.key("repeatability").begin_object();
  w.key("loa_low").value(report.loa_low);
  w.key("loa_high").value(report.loa_high);
  w.key("loa_width").value(report.loa_width());
  w.key("loa_halfwidth").value(report.loa_halfwidth());
  w.key("loa_max_abs").value(report.loa_max_abs());
  w.key("loa_halfwidth_normalized");
  write_metric(w, report.loa_halfwidth_normalized);
  w.key("disagreement");
  write_metric(w, report.disagreement);
  w.key("points").begin_array();
  for (const BlandAltmanPoint& point : report.points) {
    w.begin_object();
    w.key("subject_id").value(point.subject_id);
    w.key("session_id").value(point.session_id);
    w.key("image_lo").value(point.image_lo);
    w.key("image_hi").value(point.image_hi);
    w.key("mean").value(point.mean);
    w.key("diff").value(point.diff);
    w.end_object();
  }
  w.end_array();
  w.end_object();

  w.key("classification").begin_object();
  w.key("accuracy");
  write_metric(w, report.accuracy);
  w.key("kappa");
  write_metric(w, report.kappa);
  w.end_object();

  w.key("calibration");
  if (report.brier.has_value()) {
    w.begin_object();
    w.key("brier");
    write_metric(w, *report.brier);
    w.key("bins").begin_array();
    for (const CalibrationBin& bin : report.calibration) {
      w.begin_object();
      w.key("low").value(bin.low);
      w.key("high").value(bin.high);
      w.key("mean_predicted").value(bin.mean_predicted);        // NaN renders null
      w.key("empirical_frequency").value(bin.empirical_frequency);
      w.key("count").value(static_cast<std::int64_t>(bin.count));
      w.end_object();
    }
    w.end_array();
    w.end_object();
  } else {
    w.null();
  }

  w.end_object();
  return w.str();
}

EvaluationReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_schema(std::string("report: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw_schema("report: top level is not an object");
  if (string_field(j, "schema") != kReportSchema) {
    throw_schema("report: unknown schema '" + string_field(j, "schema") + "'");
  }

  EvaluationReport report;
  const json& head = member(j, "head");
  report.head.type = HeadKind::parse_type(string_field(head, "type"));
  report.head.num_classes = int_field(head, "k");
  if (report.head.num_classes < 2) throw_schema("report: head k must be at least 2");

  const json& aggregation = member(j, "aggregation");
  const std::string mode = string_field(aggregation, "mode");
  if (mode != "mc" && mode != "deterministic") {
    throw_schema("report: unknown aggregation mode '" + mode + "'");
  }
  report.options.use_mc = mode == "mc";
  if (report.options.use_mc) report.options.n_mc = int_field(aggregation, "n_mc");

  const json& options = member(j, "options");
  report.options.bootstrap_iters = int_field(options, "bootstrap_iters");
  report.options.calibration_bins = int_field(options, "calibration_bins");
  const json& seed = member(options, "seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
    throw_schema("report: 'seed' is not an integer");
  }
  report.options.seed = seed.get<std::uint64_t>();
  const json& boundary = member(options, "positive_boundary");
  report.options.positive_boundary = boundary.is_null() ? -1 : boundary.get<int>();

  const json& counts = member(j, "counts");
  report.n_subjects = int_field(counts, "n_subjects");
  report.n_sessions = int_field(counts, "n_sessions");
  report.n_images = int_field(counts, "n_images");
  report.n_skipped_sessions = int_field(counts, "n_skipped_sessions");

  const json& repeatability = member(j, "repeatability");
  report.loa_low = number_field(repeatability, "loa_low");
  report.loa_high = number_field(repeatability, "loa_high");
  report.loa_halfwidth_normalized = metric_field(repeatability, "loa_halfwidth_normalized");
  report.disagreement = metric_field(repeatability, "disagreement");
  const json& points = member(repeatability, "points");
  if (!points.is_array()) throw_schema("report: 'points' is not an array");
  for (const json& p : points) {
    BlandAltmanPoint point;
    point.subject_id = string_field(p, "subject_id");
    point.session_id = string_field(p, "session_id");
    point.image_lo = string_field(p, "image_lo");
    point.image_hi = string_field(p, "image_hi");
    point.mean = number_field(p, "mean");
    point.diff = number_field(p, "diff");
    report.points.push_back(std::move(point));
  }

  const json& classification = member(j, "classification");
  report.accuracy = metric_field(classification, "accuracy");
  report.kappa = metric_field(classification, "kappa");

  const json& calibration = member(j, "calibration");
  if (!calibration.is_null()) {
    report.brier = metric_field(calibration, "brier");
    const json& bins = member(calibration, "bins");
    if (!bins.is_array()) throw_schema("report: 'bins' is not an array");
    for (const json& b : bins) {
      CalibrationBin bin;
      bin.low = number_field(b, "low");
      bin.high = number_field(b, "high");
      bin.mean_predicted = number_field(b, "mean_predicted");
      bin.empirical_frequency = number_field(b, "empirical_frequency");
      bin.count = member(b, "count").get<long long>();
      report.calibration.push_back(bin);
    }
  }
  return report;
}

EvaluationReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return report_from_json(buffer.str());
}

std::vector<std::filesystem::path> write_report_files(const EvaluationReport& report,
                                                      const std::filesystem::path& directory,
                                                      const std::string& suffix) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw_io("cannot create directory '" + directory.string() + "': " + ec.message());

  std::vector<std::filesystem::path> written;
  const std::filesystem::path report_path = directory / ("report" + suffix + ".json");
  {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) throw_io("cannot open '" + report_path.string() + "' for writing");
    out << report_to_json(report);
    if (!out) throw_io("failed writing '" + report_path.string() + "'");
  }
  written.push_back(report_path);

  const std::filesystem::path ba_path = directory / ("bland_altman" + suffix + ".csv");
  {
    std::ofstream out(ba_path, std::ios::binary);
    if (!out) throw_io("cannot open '" + ba_path.string() + "' for writing");
    out << "subject_id,session_id,mean,diff\n";
    for (const BlandAltmanPoint& point : report.points) {
      out << point.subject_id << ',' << point.session_id << ',' << format_g9(point.mean) << ','
          << format_g9(point.diff) << "\n";
    }
    if (!out) throw_io("failed writing '" + ba_path.string() + "'");
  }
  written.push_back(ba_path);

  if (report.brier.has_value()) {
    const std::filesystem::path cal_path = directory / ("calibration" + suffix + ".csv");
    std::ofstream out(cal_path, std::ios::binary);
    if (!out) throw_io("cannot open '" + cal_path.string() + "' for writing");
    out << "bin_low,bin_high,mean_predicted,empirical_frequency,count\n";
    for (const CalibrationBin& bin : report.calibration) {
      out << format_g9(bin.low) << ',' << format_g9(bin.high) << ',';
      if (std::isfinite(bin.mean_predicted)) out << format_g9(bin.mean_predicted);
      out << ',';
      if (std::isfinite(bin.empirical_frequency)) out << format_g9(bin.empirical_frequency);
      out << ',' << bin.count << "\n";
    }
    if (!out) throw_io("failed writing '" + cal_path.string() + "'");
    written.push_back(cal_path);
  }
  return written;
}

ReportComparison compare_reports(const EvaluationReport& a, const EvaluationReport& b,
                                 double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw_args("alpha must be in (0, 1)");
  if (a.brier.has_value() != b.brier.has_value()) {
    throw_args("mismatched metric sets: only one report carries calibration metrics");
  }

  struct Entry {
    const char* name;
    const MetricSummary* from_a;
    const MetricSummary* from_b;
  };
  std::vector<Entry> entries = {
      {"loa_halfwidth_normalized", &a.loa_halfwidth_normalized, &b.loa_halfwidth_normalized},
      {"disagreement", &a.disagreement, &b.disagreement},
      {"accuracy", &a.accuracy, &b.accuracy},
      {"kappa", &a.kappa, &b.kappa},
  };
  if (a.brier.has_value()) entries.push_back({"brier", &*a.brier, &*b.brier});

  ReportComparison comparison;
  comparison.alpha = alpha;
  for (const Entry& entry : entries) {
    const TestResult test = welch_t_test(entry.from_a->samples, entry.from_b->samples);
    MetricComparison mc;
    mc.metric = entry.name;
    mc.value_a = entry.from_a->value;
    mc.value_b = entry.from_b->value;
    mc.statistic = test.statistic;
    mc.p_value = test.p_value;
    mc.significant = test.p_value < alpha;
    comparison.metrics.push_back(std::move(mc));
  }
  return comparison;
}

std::string comparison_to_json(const ReportComparison& comparison) {
  JsonWriter w;
  w.begin_object();
  w.key("schema").value(kCompareSchema);
  w.key("alpha").value(comparison.alpha);
  w.key("metrics").begin_array();
  for (const MetricComparison& metric : comparison.metrics) {
    w.begin_object();
    w.key("metric").value(metric.metric);
    w.key("value_a").value(metric.value_a);
    w.key("value_b").value(metric.value_b);
    w.key("statistic").value(metric.statistic);  // infinite statistic renders null
    w.key("p_value").value(metric.p_value);
    w.key("significant").value(metric.significant);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

}  // namespace repeatlab
