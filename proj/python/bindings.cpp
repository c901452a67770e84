// Python bindings for the core operations: scoring, agreement statistics,
// classification/calibration metrics, the statistical machinery, file
// evaluation/comparison/sweeps, and the end-to-end simulation.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "repeatlab/errors.hpp"
#include "repeatlab/metrics.hpp"
#include "repeatlab/records.hpp"
#include "repeatlab/repeatability.hpp"
#include "repeatlab/report.hpp"
#include "repeatlab/scoring.hpp"
#include "repeatlab/simlab.hpp"
#include "repeatlab/simulate.hpp"
#include "repeatlab/stats.hpp"

namespace py = pybind11;

namespace {

using namespace repeatlab;

AggregatedPrediction make_prediction(const std::string& head_type, int k,
                                     std::vector<double> outputs) {
  const HeadKind head{HeadKind::parse_type(head_type), k};
  if (static_cast<int>(outputs.size()) != head.output_arity()) {
    throw_args("head '" + head_type + "' with k=" + std::to_string(k) + " expects " +
               std::to_string(head.output_arity()) + " outputs, got " +
               std::to_string(outputs.size()));
  }
  return {head, std::move(outputs), 1, false};
}

std::vector<HeadType> parse_heads(const std::vector<std::string>& names) {
  std::vector<HeadType> heads;
  for (const std::string& name : names) heads.push_back(HeadKind::parse_type(name));
  return heads;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Test-retest repeatability and calibration of classification predictors (C++ core)";

  py::register_exception<Error>(m, "Error");

  // --- scoring -------------------------------------------------------------
  m.def(
      "severity_score",
      [](const std::string& head, int k, std::vector<double> outputs) {
        return severity_score(make_prediction(head, k, std::move(outputs))).value;
      },
      py::arg("head"), py::arg("k"), py::arg("outputs"),
      "Scalar severity of one aggregated prediction.");
  m.def(
      "assign_class",
      [](const std::string& head, int k, std::vector<double> outputs) {
        return assign_class(make_prediction(head, k, std::move(outputs)));
      },
      py::arg("head"), py::arg("k"), py::arg("outputs"),
      "Hard class in [0, k-1] of one aggregated prediction.");

  // --- agreement -----------------------------------------------------------
  m.def(
      "limits_of_agreement",
      [](std::vector<double> diffs) {
        const auto [lo, hi] = limits_of_agreement(diffs);
        return py::make_tuple(lo, hi);
      },
      py::arg("diffs"), "Empirical 2.5th/97.5th percentiles of the differences.");
  m.def(
      "percentile",
      [](std::vector<double> values, double q) {
        std::sort(values.begin(), values.end());
        return percentile_linear(values, q);
      },
      py::arg("values"), py::arg("q"),
      "Linear-interpolation percentile (rank position q*(n-1), zero-based).");

  // --- metrics ---------------------------------------------------------
  m.def(
      "accuracy",
      [](const std::vector<int>& labels, const std::vector<int>& predictions) {
        return accuracy(labels, predictions);
      },
      py::arg("labels"), py::arg("predictions"));
  m.def(
      "quadratic_weighted_kappa",
      [](const std::vector<int>& labels, const std::vector<int>& predictions, int k) {
        return quadratic_weighted_kappa(ConfusionMatrix::from_pairs(labels, predictions, k));
      },
      py::arg("labels"), py::arg("predictions"), py::arg("k"));
  m.def(
      "brier_score_binary",
      [](const std::vector<int>& labels, const std::vector<double>& probabilities) {
        return brier_score_binary(labels, probabilities);
      },
      py::arg("labels"), py::arg("probabilities"));

  // --- statistics ------------------------------------------------------
  m.def(
      "welch_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const TestResult r = welch_t_test(a, b);
        return py::make_tuple(r.statistic, r.p_value);
      },
      py::arg("a"), py::arg("b"), "Welch's t-test; returns (statistic, two-sided p).");
  m.def(
      "shapiro_wilk",
      [](const std::vector<double>& sample) {
        const TestResult r = shapiro_wilk(sample);
        return py::make_tuple(r.statistic, r.p_value);
      },
      py::arg("sample"), "Shapiro-Wilk normality test; returns (W, p).");
  m.def("normal_quantile", &normal_quantile, py::arg("p"));
  m.def(
      "bootstrap_mean",
      [](const std::vector<double>& values, int iterations, std::uint64_t seed) {
        const BootstrapResult r = bootstrap_metric<double>(
            values,
            [](const std::vector<double>& resample) {
              double total = 0.0;
              for (double v : resample) total += v;
              return total / static_cast<double>(resample.size());
            },
            iterations, seed);
        py::dict out;
        out["point_estimate"] = r.point_estimate;
        out["ci_low"] = r.ci_low;
        out["ci_high"] = r.ci_high;
        out["samples"] = r.samples;
        return out;
      },
      py::arg("values"), py::arg("iterations") = 500, py::arg("seed") = 0,
      "Bootstrap the mean of a sample; returns point estimate, CI and replicates.");

  // --- pipelines ---------------------------------------------------------
  m.def(
      "evaluate",
      [](const std::string& predictions, const std::string& labels, bool use_mc, int n_mc,
         int bootstrap_iters, int bins, std::uint64_t seed, int boundary) {
        EvaluationOptions options;
        options.use_mc = use_mc;
        options.n_mc = n_mc;
        options.bootstrap_iters = bootstrap_iters;
        options.calibration_bins = bins;
        options.seed = seed;
        options.positive_boundary = boundary;
        return report_to_json(
            build_evaluation_report(load_records(predictions), load_labels(labels), options));
      },
      py::arg("predictions"), py::arg("labels"), py::arg("use_mc") = true, py::arg("n_mc") = 50,
      py::arg("bootstrap_iters") = 500, py::arg("bins") = 10, py::arg("seed") = 0,
      py::arg("boundary") = -1, "Evaluate a record file against labels; returns report JSON.");
  m.def(
      "compare",
      [](const std::string& report_json_a, const std::string& report_json_b, double alpha) {
        return comparison_to_json(compare_reports(report_from_json(report_json_a),
                                                  report_from_json(report_json_b), alpha));
      },
      py::arg("report_json_a"), py::arg("report_json_b"), py::arg("alpha") = 0.05,
      "Welch-test every metric of two report JSON documents; returns comparison JSON.");
  m.def(
      "sweep",
      [](const std::string& predictions, const std::string& labels, std::vector<int> passes) {
        const auto rows =
            simlab::mc_sweep(load_records(predictions), load_labels(labels), std::move(passes));
        py::list out;
        for (const simlab::SweepRow& row : rows) {
          py::dict entry;
          entry["n_mc"] = row.n_mc;
          entry["loa"] = row.loa;
          entry["disagreement"] = row.disagreement;
          entry["accuracy"] = row.accuracy;
          entry["kappa"] = row.kappa;
          out.append(entry);
        }
        return out;
      },
      py::arg("predictions"), py::arg("labels"),
      py::arg("passes") = std::vector<int>{1, 2, 5, 10, 20, 50},
      "Metrics per passes-per-image count plus the deterministic baseline row (n_mc = -1).");
  m.def(
      "simulate",
      [](const std::string& out_dir, int subjects, int images, int k, int dim, double sigma,
         double label_noise, std::uint64_t cohort_seed, const std::vector<std::string>& heads,
         const std::vector<int>& hidden, double dropout, int epochs, int batch_size, double lr,
         int n_mc, const std::vector<int>& sweep_passes, int bootstrap_iters, int bins,
         std::uint64_t seed) {
        simlab::SimulationConfig config;
        config.cohort.n_subjects = subjects;
        config.cohort.images_per_subject = images;
        config.cohort.k = k;
        config.cohort.feature_dim = dim;
        config.cohort.image_noise_sigma = sigma;
        config.cohort.label_noise_rate = label_noise;
        config.cohort.seed = cohort_seed;
        config.heads = parse_heads(heads);
        config.hidden_sizes = hidden;
        config.dropout_rate = dropout;
        config.epochs = epochs;
        config.batch_size = batch_size;
        config.learning_rate = lr;
        config.n_mc = n_mc;
        config.sweep_passes = sweep_passes;
        config.bootstrap_iters = bootstrap_iters;
        config.calibration_bins = bins;
        config.seed = seed;
        const simlab::SimulationResult result = simlab::run_simulation(config, out_dir);
        return result.manifest_path.string();
      },
      py::arg("out_dir"), py::arg("subjects") = 500, py::arg("images") = 2, py::arg("k") = 3,
      py::arg("dim") = 16, py::arg("sigma") = 0.35, py::arg("label_noise") = 0.15,
      py::arg("cohort_seed") = 1,
      py::arg("heads") = std::vector<std::string>{"binary", "multiclass", "ordinal", "regression"},
      py::arg("hidden") = std::vector<int>{64, 64}, py::arg("dropout") = 0.1,
      py::arg("epochs") = 120, py::arg("batch_size") = 32, py::arg("lr") = 0.05,
      py::arg("n_mc") = 50, py::arg("sweep_passes") = std::vector<int>{1, 2, 5, 10, 20, 50},
      py::arg("bootstrap_iters") = 500, py::arg("bins") = 10, py::arg("seed") = 1,
      "Run the full simulated experiment into out_dir; returns the manifest path.");
}
