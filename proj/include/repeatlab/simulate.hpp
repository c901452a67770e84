#pragma once

// One-command experiment: generate a synthetic test-retest cohort, train a
// dropout model and a matched no-dropout baseline per requested head, run the
// stochastic-average and deterministic evaluation pipelines on the test
// split, compare them metric-by-metric, sweep the passes-per-image count,
// and write every artifact plus a manifest (all seeds, config hash, and one
// content hash per emitted file). Identical configs produce byte-identical
// directories.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "repeatlab/report.hpp"
#include "repeatlab/simlab.hpp"

namespace repeatlab::simlab {

struct SimulationConfig {
  CohortConfig cohort;
  std::vector<HeadType> heads = {HeadType::binary, HeadType::multiclass, HeadType::ordinal,
                                 HeadType::regression};
  std::vector<int> hidden_sizes = {64, 64};
  double dropout_rate = 0.2;
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 0.05;
  int n_mc = 50;
  std::vector<int> sweep_passes = {1, 2, 5, 10, 20, 50};
  int bootstrap_iters = 500;
  int calibration_bins = 10;
  // Master seed for model init, training, prediction and bootstrap
  // substreams. The cohort uses its own seed field.
  std::uint64_t seed = 1;
};

struct HeadArtifacts {
  HeadKind head;
  EvaluationReport report_mc;        // dropout model, n_mc-pass aggregation
  EvaluationReport report_baseline;  // separately trained no-dropout model
  ReportComparison comparison;       // mc vs baseline
  std::vector<SweepRow> sweep;       // dropout model, prefix aggregation
};

struct SimulationResult {
  std::filesystem::path out_dir;
  std::filesystem::path manifest_path;
  std::vector<std::filesystem::path> files;  // everything the manifest references
  std::vector<HeadArtifacts> heads;
};

// The canonical JSON form of a config; its 64-bit FNV-1a hash is the
// manifest's config_hash.
std::string simulation_config_json(const SimulationConfig& config);

SimulationResult run_simulation(const SimulationConfig& config,
                                const std::filesystem::path& out_dir);

}  // namespace repeatlab::simlab
