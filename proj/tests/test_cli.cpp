#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "repeatlab/records.hpp"
#include "repeatlab/report.hpp"
#include "repeatlab/simlab.hpp"
#include "test_util.hpp"

using namespace repeatlab;
using namespace repeatlab::simlab;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

CliResult run_cli(const std::string& args) {
  const std::string command = std::string(REPEATLAB_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(command.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("popen failed for: " + command);
  CliResult result;
  char buffer[4096];
  while (std::fgets(buffer, sizeof(buffer), pipe) != nullptr) result.output += buffer;
  const int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

struct CliFixture {
  testutil::TempDir dir{"cli"};
  RecordSet records;
  LabelMap labels;
  std::filesystem::path records_path;
  std::filesystem::path labels_path;
};

CliFixture& fixture() {
  static CliFixture f;
  static const bool initialized = [] {
    CohortConfig cfg;
    cfg.n_subjects = 40;
    cfg.images_per_subject = 2;
    cfg.k = 3;
    cfg.feature_dim = 5;
    cfg.seed = 64;
    const SyntheticCohort cohort = generate_cohort(cfg);

    MlpConfig mlp;
    mlp.input_dim = 5;
    mlp.hidden_sizes = {8};
    mlp.head = HeadKind::multiclass(3);
    mlp.dropout_rate = 0.25;
    const MlpModel model(mlp, 21);
    f.records = predict_records(model, cohort, Split::test, 6, 909, true);
    f.labels = cohort_labels(cohort, Split::test);

    f.records_path = f.dir.file("records.csv");
    f.labels_path = f.dir.file("labels.csv");
    write_records(f.records, f.records_path);
    write_labels(f.labels, f.labels_path);
    return true;
  }();
  (void)initialized;
  return f;
}

}  // namespace

TEST_CASE("the evaluate command writes exactly what the library writes") {
  CliFixture& f = fixture();
  const auto cli_out = f.dir.path() / "eval_cli";
  const CliResult run = run_cli("evaluate --predictions " + f.records_path.string() +
                                " --labels " + f.labels_path.string() +
                                " --n-mc 6 --bootstrap-iters 40 --seed 9 --out " +
                                cli_out.string());
  CAPTURE(run.output);
  REQUIRE_EQ(run.exit_code, 0);
  CHECK(run.output.find("wrote ") != std::string::npos);

  EvaluationOptions options;
  options.n_mc = 6;
  options.bootstrap_iters = 40;
  options.seed = 9;
  const EvaluationReport report = build_evaluation_report(f.records, f.labels, options);
  const auto lib_out = f.dir.path() / "eval_lib";
  write_report_files(report, lib_out);
  for (const char* name : {"report.json", "bland_altman.csv", "calibration.csv"}) {
    CAPTURE(name);
    CHECK_EQ(testutil::read_file(cli_out / name), testutil::read_file(lib_out / name));
  }
}

TEST_CASE("the compare command equals loading both reports and comparing them") {
  CliFixture& f = fixture();
  EvaluationOptions options;
  options.n_mc = 6;
  options.bootstrap_iters = 40;

  options.seed = 9;
  const EvaluationReport a = build_evaluation_report(f.records, f.labels, options);
  options.seed = 10;
  options.use_mc = false;
  const EvaluationReport b = build_evaluation_report(f.records, f.labels, options);
  const auto dir_a = f.dir.path() / "cmp_a";
  const auto dir_b = f.dir.path() / "cmp_b";
  const auto report_a = write_report_files(a, dir_a).front();
  const auto report_b = write_report_files(b, dir_b).front();

  const auto cmp_path = f.dir.path() / "compare.json";
  const CliResult run = run_cli("compare " + report_a.string() + " " + report_b.string() +
                                " --alpha 0.01 --out " + cmp_path.string());
  CAPTURE(run.output);
  REQUIRE_EQ(run.exit_code, 0);

  // The CLI compares the files as parsed, so the mirror parses them too.
  const ReportComparison comparison =
      compare_reports(load_report(report_a), load_report(report_b), 0.01);
  CHECK_EQ(testutil::read_file(cmp_path), comparison_to_json(comparison));
}

TEST_CASE("the sweep command writes the library's sweep CSV byte for byte") {
  CliFixture& f = fixture();
  const auto sweep_path = f.dir.path() / "sweep_cli.csv";
  const CliResult run = run_cli("sweep --predictions " + f.records_path.string() + " --labels " +
                                f.labels_path.string() + " --ns 1,3,6 --out " +
                                sweep_path.string());
  CAPTURE(run.output);
  REQUIRE_EQ(run.exit_code, 0);

  const auto lib_path = f.dir.path() / "sweep_lib.csv";
  write_sweep_csv(mc_sweep(f.records, f.labels, {1, 3, 6}), lib_path);
  CHECK_EQ(testutil::read_file(sweep_path), testutil::read_file(lib_path));
}

TEST_CASE("the simulate command emits a manifest whose file list is accurate") {
  CliFixture& f = fixture();
  const auto sim_dir = f.dir.path() / "sim";
  const CliResult run = run_cli(
      "simulate --out " + sim_dir.string() +
      " --subjects 24 --k 3 --dim 4 --heads binary --hidden 6 --epochs 3 --n-mc 4 --ns 1,2"
      " --bootstrap-iters 20 --seed 5 --cohort-seed 5");
  CAPTURE(run.output);
  REQUIRE_EQ(run.exit_code, 0);

  const auto manifest_path = sim_dir / "manifest.json";
  REQUIRE(std::filesystem::exists(manifest_path));
  const nlohmann::json manifest = nlohmann::json::parse(testutil::read_file(manifest_path));
  CHECK_EQ(manifest.at("schema").get<std::string>(), "repeatlab/manifest/v1");
  CHECK_EQ(manifest.at("seeds").at("master").get<std::uint64_t>(), 5);
  const auto& files = manifest.at("files");
  REQUIRE(files.is_array());
  CHECK_GT(files.size(), 0u);
  for (const auto& entry : files) {
    const auto rel = entry.at("path").get<std::string>();
    CAPTURE(rel);
    const auto path = sim_dir / rel;
    REQUIRE(std::filesystem::exists(path));
    CHECK_EQ(entry.at("bytes").get<std::uint64_t>(), std::filesystem::file_size(path));
  }

  // Every path the command reported exists.
  std::istringstream lines(run.output);
  std::string line;
  int wrote_lines = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("wrote ", 0) != 0) continue;
    ++wrote_lines;
    CHECK(std::filesystem::exists(line.substr(6)));
  }
  CHECK_GT(wrote_lines, 0);
}

TEST_CASE("failures print one diagnostic line with the error code") {
  CliFixture& f = fixture();

  const CliResult missing = run_cli("evaluate --predictions /nonexistent/records.csv --labels " +
                                    f.labels_path.string() + " --seed 1 --out " +
                                    (f.dir.path() / "x").string());
  CHECK_EQ(missing.exit_code, 1);
  CHECK(missing.output.rfind("error[io]: ", 0) == 0);
  CHECK_EQ(std::count(missing.output.begin(), missing.output.end(), '\n'), 1);

  const auto bad_records = f.dir.file("bad.csv");
  testutil::write_file(bad_records, "not,a,valid,header\n");
  const CliResult schema = run_cli("evaluate --predictions " + bad_records.string() +
                                   " --labels " + f.labels_path.string() + " --seed 1 --out " +
                                   (f.dir.path() / "y").string());
  CHECK_EQ(schema.exit_code, 1);
  CHECK(schema.output.rfind("error[schema]: ", 0) == 0);

  const CliResult unknown = run_cli("evaluate --no-such-flag");
  CHECK_EQ(unknown.exit_code, 1);
  CHECK(unknown.output.rfind("error[args]: ", 0) == 0);

  const CliResult no_subcommand = run_cli("");
  CHECK_EQ(no_subcommand.exit_code, 1);
  CHECK(no_subcommand.output.rfind("error[args]: ", 0) == 0);

  const CliResult bad_head = run_cli("simulate --out " + (f.dir.path() / "z").string() +
                                     " --heads sigmoid");
  CHECK_EQ(bad_head.exit_code, 1);
  CHECK(bad_head.output.rfind("error[args]: ", 0) == 0);
  CHECK(bad_head.output.find("sigmoid") != std::string::npos);
}

TEST_CASE("help exits cleanly and names every subcommand") {
  const CliResult help = run_cli("--help");
  CHECK_EQ(help.exit_code, 0);
  for (const char* name : {"evaluate", "compare", "sweep", "simulate"}) {
    CAPTURE(name);
    CHECK(help.output.find(name) != std::string::npos);
  }
}
