// Command-line front end: evaluate record files, compare two reports, sweep
// the passes-per-image count, and run the full simulated experiment. Every
// command is a thin wrapper over the library; outputs are byte-stable for
// fixed inputs and seeds. Errors print one line, `error[code]: message`.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "repeatlab/errors.hpp"
#include "repeatlab/records.hpp"
#include "repeatlab/report.hpp"
#include "repeatlab/simlab.hpp"
#include "repeatlab/simulate.hpp"

namespace {

using repeatlab::EvaluationOptions;
using repeatlab::EvaluationReport;
using repeatlab::HeadKind;
using repeatlab::HeadType;
using repeatlab::LabelMap;
using repeatlab::RecordSet;
using repeatlab::ReportComparison;

void wrote(const std::filesystem::path& path) { std::cout << "wrote " << path.string() << "\n"; }

struct EvaluateArgs {
  std::string predictions;
  std::string labels;
  int n_mc = 50;
  bool deterministic = false;
  int bootstrap_iters = 500;
  int bins = 10;
  int boundary = -1;
  std::uint64_t seed = 0;
  std::string out;
};

void run_evaluate(const EvaluateArgs& args) {
  const RecordSet records = repeatlab::load_records(args.predictions);
  const LabelMap labels = repeatlab::load_labels(args.labels);
  EvaluationOptions options;
  options.use_mc = !args.deterministic;
  options.n_mc = args.n_mc;
  options.bootstrap_iters = args.bootstrap_iters;
  options.calibration_bins = args.bins;
  options.positive_boundary = args.boundary;
  options.seed = args.seed;
  const EvaluationReport report = repeatlab::build_evaluation_report(records, labels, options);
  for (const auto& path : repeatlab::write_report_files(report, args.out)) wrote(path);
}

struct CompareArgs {
  std::string report_a;
  std::string report_b;
  double alpha = 0.05;
  std::string out;
};

void run_compare(const CompareArgs& args) {
  const EvaluationReport a = repeatlab::load_report(args.report_a);
  const EvaluationReport b = repeatlab::load_report(args.report_b);
  const ReportComparison comparison = repeatlab::compare_reports(a, b, args.alpha);
  std::ofstream out(args.out, std::ios::binary);
  if (!out) repeatlab::throw_io("cannot open '" + args.out + "' for writing");
  out << repeatlab::comparison_to_json(comparison);
  if (!out) repeatlab::throw_io("failed writing '" + args.out + "'");
  wrote(args.out);
}

struct SweepArgs {
  std::string predictions;
  std::string labels;
  std::vector<int> passes = {1, 2, 5, 10, 20, 50};
  std::uint64_t seed = 0;  // accepted for interface uniformity; the sweep is deterministic
  std::string out;
};

void run_sweep(const SweepArgs& args) {
  const RecordSet records = repeatlab::load_records(args.predictions);
  const LabelMap labels = repeatlab::load_labels(args.labels);
  const auto rows = repeatlab::simlab::mc_sweep(records, labels, args.passes);
  repeatlab::simlab::write_sweep_csv(rows, args.out);
  wrote(args.out);
}

struct SimulateArgs {
  repeatlab::simlab::SimulationConfig config;
  std::vector<std::string> heads = {"binary", "multiclass", "ordinal", "regression"};
  std::string out;
};

void run_simulate(SimulateArgs& args) {
  args.config.heads.clear();
  for (const std::string& name : args.heads) {
    if (name != "binary" && name != "multiclass" && name != "ordinal" && name != "regression") {
      repeatlab::throw_args("unknown head '" + name +
                            "' (expected binary, multiclass, ordinal or regression)");
    }
    args.config.heads.push_back(HeadKind::parse_type(name));
  }
  const auto result = repeatlab::simlab::run_simulation(args.config, args.out);
  for (const auto& path : result.files) wrote(path);
  wrote(result.manifest_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"test-retest repeatability and calibration of classification predictors"};
  app.require_subcommand(1);

  EvaluateArgs evaluate_args;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Score a record file and write report.json, bland_altman.csv, calibration.csv");
  evaluate->add_option("--predictions", evaluate_args.predictions, "prediction records (.csv/.json)")
      ->envname("REPEATLAB_PREDICTIONS")
      ->required();
  evaluate->add_option("--labels", evaluate_args.labels, "label file (.csv)")
      ->envname("REPEATLAB_LABELS")
      ->required();
  evaluate->add_option("--n-mc", evaluate_args.n_mc, "stochastic passes averaged per image")
      ->envname("REPEATLAB_N_MC")
      ->capture_default_str();
  evaluate->add_flag("--deterministic", evaluate_args.deterministic,
                     "evaluate the deterministic rows instead of averaging stochastic passes");
  evaluate
      ->add_option("--bootstrap-iters", evaluate_args.bootstrap_iters,
                   "bootstrap iterations per metric")
      ->envname("REPEATLAB_BOOTSTRAP_ITERS")
      ->capture_default_str();
  evaluate->add_option("--bins", evaluate_args.bins, "calibration curve bins")
      ->envname("REPEATLAB_BINS")
      ->capture_default_str();
  evaluate->add_option("--boundary", evaluate_args.boundary,
                       "positive-class boundary for calibration on k > 2 heads (default k/2)");
  evaluate->add_option("--seed", evaluate_args.seed, "bootstrap seed")
      ->envname("REPEATLAB_SEED")
      ->required();
  evaluate->add_option("--out", evaluate_args.out, "output directory")
      ->envname("REPEATLAB_OUT")
      ->required();
  evaluate->callback([&] { run_evaluate(evaluate_args); });

  CompareArgs compare_args;
  CLI::App* compare = app.add_subcommand(
      "compare", "Welch-test every metric of two reports' bootstrap distributions");
  compare->add_option("report_a", compare_args.report_a, "first report.json")->required();
  compare->add_option("report_b", compare_args.report_b, "second report.json")->required();
  compare->add_option("--alpha", compare_args.alpha, "significance level")
      ->capture_default_str();
  compare->add_option("--out", compare_args.out, "comparison JSON path")
      ->envname("REPEATLAB_OUT")
      ->required();
  compare->callback([&] { run_compare(compare_args); });

  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Repeatability and classification metrics per passes-per-image count");
  sweep->add_option("--predictions", sweep_args.predictions, "prediction records (.csv/.json)")
      ->envname("REPEATLAB_PREDICTIONS")
      ->required();
  sweep->add_option("--labels", sweep_args.labels, "label file (.csv)")
      ->envname("REPEATLAB_LABELS")
      ->required();
  sweep->add_option("--ns", sweep_args.passes, "pass counts to sweep (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--seed", sweep_args.seed, "accepted for uniformity; sweep is deterministic")
      ->envname("REPEATLAB_SEED");
  sweep->add_option("--out", sweep_args.out, "sweep CSV path")
      ->envname("REPEATLAB_OUT")
      ->required();
  sweep->callback([&] { run_sweep(sweep_args); });

  SimulateArgs simulate_args;
  auto& sim = simulate_args.config;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Generate a cohort, train dropout and baseline models per head, evaluate, "
                  "compare, sweep, and write a manifest");
  simulate->add_option("--out", simulate_args.out, "output directory")
      ->envname("REPEATLAB_OUT")
      ->required();
  simulate->add_option("--seed", sim.seed, "master seed for init/train/predict/bootstrap")
      ->envname("REPEATLAB_SEED")
      ->capture_default_str();
  simulate->add_option("--cohort-seed", sim.cohort.seed, "cohort generation seed")
      ->capture_default_str();
  simulate->add_option("--subjects", sim.cohort.n_subjects, "cohort size")
      ->capture_default_str();
  simulate->add_option("--images", sim.cohort.images_per_subject, "images per subject session")
      ->capture_default_str();
  simulate->add_option("--k", sim.cohort.k, "label alphabet size")->capture_default_str();
  simulate->add_option("--dim", sim.cohort.feature_dim, "feature dimension")
      ->capture_default_str();
  simulate->add_option("--sigma", sim.cohort.image_noise_sigma, "per-image feature noise")
      ->capture_default_str();
  simulate->add_option("--label-noise", sim.cohort.label_noise_rate,
                       "boundary label flip probability")
      ->capture_default_str();
  simulate->add_option("--heads", simulate_args.heads, "heads to train (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--hidden", sim.hidden_sizes, "hidden layer sizes (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--dropout", sim.dropout_rate, "dropout rate of the stochastic model")
      ->capture_default_str();
  simulate->add_option("--epochs", sim.epochs, "training epochs")->capture_default_str();
  simulate->add_option("--batch-size", sim.batch_size, "mini-batch size")->capture_default_str();
  simulate->add_option("--lr", sim.learning_rate, "learning rate")->capture_default_str();
  simulate->add_option("--n-mc", sim.n_mc, "stochastic passes per image")
      ->envname("REPEATLAB_N_MC")
      ->capture_default_str();
  simulate->add_option("--ns", sim.sweep_passes, "sweep pass counts (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--bootstrap-iters", sim.bootstrap_iters, "bootstrap iterations")
      ->envname("REPEATLAB_BOOTSTRAP_ITERS")
      ->capture_default_str();
  simulate->add_option("--bins", sim.calibration_bins, "calibration curve bins")
      ->envname("REPEATLAB_BINS")
      ->capture_default_str();
  simulate->callback([&] { run_simulate(simulate_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << "error[args]: " << e.what() << "\n";
    return 1;
  } catch (const repeatlab::Error& e) {
    std::cerr << "error[" << e.code() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
