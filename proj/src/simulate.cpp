#include "repeatlab/simulate.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "repeatlab/errors.hpp"
#include "repeatlab/jsonio.hpp"

namespace repeatlab::simlab {

namespace {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
    value >>= 4;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw_io("failed writing '" + path.string() + "'");
}

void check_config(const SimulationConfig& config) {
  if (config.heads.empty()) throw_args("simulation needs at least one head");
  std::set<HeadType> seen;
  for (HeadType type : config.heads) {
    if (!seen.insert(type).second) throw_args("duplicate head in simulation config");
  }
  if (config.n_mc < 1) throw_args("n_mc must be positive");
  if (config.sweep_passes.empty()) throw_args("sweep needs at least one pass count");
  for (int n : config.sweep_passes) {
    if (n < 1) throw_args("sweep pass counts must be positive");
    if (n > config.n_mc) {
      throw_args("sweep pass count " + std::to_string(n) + " exceeds n_mc " +
                 std::to_string(config.n_mc));
    }
  }
  if (config.epochs < 1) throw_args("epochs must be positive");
  if (config.batch_size < 1) throw_args("batch_size must be positive");
  if (config.learning_rate <= 0.0) throw_args("learning_rate must be positive");
  if (config.dropout_rate <= 0.0 || config.dropout_rate >= 1.0) {
    throw_args("dropout_rate must be in (0, 1)");
  }
  if (config.bootstrap_iters < 2) throw_args("bootstrap_iters must be at least 2");
  if (config.calibration_bins < 2) throw_args("calibration_bins must be at least 2");
}

HeadKind head_for(HeadType type, int k) {
  switch (type) {
    case HeadType::binary: return HeadKind::binary();
    case HeadType::multiclass: return HeadKind::multiclass(k);
    case HeadType::ordinal: return HeadKind::ordinal(k);
    case HeadType::regression: return HeadKind::regression(k);
  }
  throw_args("invalid head type");
}

// Per-head substream ids under the master seed.
struct HeadSeeds {
  std::uint64_t init_mc, train_mc, predict_mc;
  std::uint64_t init_baseline, train_baseline, predict_baseline;
  std::uint64_t report_mc, report_baseline;
};

HeadSeeds head_seeds(std::uint64_t master, std::size_t head_index) {
  const std::uint64_t base = static_cast<std::uint64_t>(head_index) * 10;
  return {derive_stream(master, base + 1), derive_stream(master, base + 2),
          derive_stream(master, base + 3), derive_stream(master, base + 4),
          derive_stream(master, base + 5), derive_stream(master, base + 6),
          derive_stream(master, base + 7), derive_stream(master, base + 8)};
}

void write_config_body(JsonWriter& w, const SimulationConfig& config);

}  // namespace

std::string simulation_config_json(const SimulationConfig& config) {
  JsonWriter w;
  write_config_body(w, config);
  return w.str();
}

namespace {

void write_config_body(JsonWriter& w, const SimulationConfig& config) {
  w.begin_object();
  w.key("cohort").begin_object();
  w.key("n_subjects").value(config.cohort.n_subjects);
  w.key("images_per_subject").value(config.cohort.images_per_subject);
  w.key("k").value(config.cohort.k);
  w.key("feature_dim").value(config.cohort.feature_dim);
  w.key("image_noise_sigma").value(config.cohort.image_noise_sigma);
  w.key("label_noise_rate").value(config.cohort.label_noise_rate);
  w.key("train_fraction").value(config.cohort.train_fraction);
  w.key("val_fraction").value(config.cohort.val_fraction);
  w.key("seed").value(static_cast<std::uint64_t>(config.cohort.seed));
  w.end_object();
  w.key("heads").begin_array(true);
  for (HeadType type : config.heads) w.value(head_for(type, 2).name());
  w.end_array();
  w.key("model").begin_object();
  w.key("hidden_sizes").begin_array(true);
  for (int size : config.hidden_sizes) w.value(size);
  w.end_array();
  w.key("dropout_rate").value(config.dropout_rate);
  w.end_object();
  w.key("train").begin_object();
  w.key("epochs").value(config.epochs);
  w.key("batch_size").value(config.batch_size);
  w.key("learning_rate").value(config.learning_rate);
  w.end_object();
  w.key("evaluation").begin_object();
  w.key("n_mc").value(config.n_mc);
  w.key("sweep_passes").begin_array(true);
  for (int n : config.sweep_passes) w.value(n);
  w.end_array();
  w.key("bootstrap_iters").value(config.bootstrap_iters);
  w.key("calibration_bins").value(config.calibration_bins);
  w.end_object();
  w.key("seed").value(static_cast<std::uint64_t>(config.seed));
  w.end_object();
}

}  // namespace

SimulationResult run_simulation(const SimulationConfig& config,
                                const std::filesystem::path& out_dir) {
  check_config(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw_io("cannot create directory '" + out_dir.string() + "': " + ec.message());

  const SyntheticCohort cohort = generate_cohort(config.cohort);

  SimulationResult result;
  result.out_dir = out_dir;

  for (std::size_t h = 0; h < config.heads.size(); ++h) {
    const HeadKind head = head_for(config.heads[h], config.cohort.k);
    const HeadSeeds seeds = head_seeds(config.seed, h);
    const std::filesystem::path head_dir = out_dir / head.name();
    std::filesystem::create_directories(head_dir, ec);
    if (ec) throw_io("cannot create directory '" + head_dir.string() + "': " + ec.message());

    const int binarize =
        head.type == HeadType::binary ? default_binary_boundary(config.cohort.k) : 0;
    const LabelMap labels = cohort_labels(cohort, Split::test, binarize);

    MlpConfig model_config;
    model_config.input_dim = config.cohort.feature_dim;
    model_config.hidden_sizes = config.hidden_sizes;
    model_config.head = head;

    TrainConfig train_config;
    train_config.epochs = config.epochs;
    train_config.batch_size = config.batch_size;
    train_config.learning_rate = config.learning_rate;
    train_config.loss = default_loss(head);

    model_config.dropout_rate = config.dropout_rate;
    MlpModel model_mc(model_config, seeds.init_mc);
    train_config.seed = seeds.train_mc;
    train(model_mc, cohort, train_config);
    const RecordSet records_mc =
        predict_records(model_mc, cohort, Split::test, config.n_mc, seeds.predict_mc, true);

    model_config.dropout_rate = 0.0;
    MlpModel model_baseline(model_config, seeds.init_baseline);
    train_config.seed = seeds.train_baseline;
    train(model_baseline, cohort, train_config);
    const RecordSet records_baseline =
        predict_records(model_baseline, cohort, Split::test, 0, seeds.predict_baseline, true);

    EvaluationOptions options;
    options.bootstrap_iters = config.bootstrap_iters;
    options.calibration_bins = config.calibration_bins;

    options.use_mc = true;
    options.n_mc = config.n_mc;
    options.seed = seeds.report_mc;
    const EvaluationReport report_mc = build_evaluation_report(records_mc, labels, options);

    options.use_mc = false;
    options.seed = seeds.report_baseline;
    const EvaluationReport report_baseline =
        build_evaluation_report(records_baseline, labels, options);

    const ReportComparison comparison = compare_reports(report_mc, report_baseline);
    const std::vector<SweepRow> sweep = mc_sweep(records_mc, labels, config.sweep_passes);

    write_records(records_mc, head_dir / "records_mc.csv");
    result.files.push_back(head_dir / "records_mc.csv");
    write_records(records_baseline, head_dir / "records_baseline.csv");
    result.files.push_back(head_dir / "records_baseline.csv");
    write_labels(labels, head_dir / "labels.csv");
    result.files.push_back(head_dir / "labels.csv");
    for (const std::filesystem::path& path : write_report_files(report_mc, head_dir, "_mc")) {
      result.files.push_back(path);
    }
    for (const std::filesystem::path& path :
         write_report_files(report_baseline, head_dir, "_baseline")) {
      result.files.push_back(path);
    }
    write_file(head_dir / "compare.json", comparison_to_json(comparison));
    result.files.push_back(head_dir / "compare.json");
    write_sweep_csv(sweep, head_dir / "sweep.csv");
    result.files.push_back(head_dir / "sweep.csv");

    result.heads.push_back({head, report_mc, report_baseline, comparison, sweep});
  }

  // Manifest: config (with hash), every seed, and a content hash per file.
  const std::string config_json = simulation_config_json(config);
  JsonWriter w;
  w.begin_object();
  w.key("schema").value("repeatlab/manifest/v1");
  w.key("config_hash").value(hex64(fnv1a64(config_json)));
  w.key("config");
  write_config_body(w, config);
  w.key("seeds").begin_object();
  w.key("master").value(static_cast<std::uint64_t>(config.seed));
  w.key("cohort").value(static_cast<std::uint64_t>(config.cohort.seed));
  w.key("heads").begin_object();
  for (std::size_t h = 0; h < config.heads.size(); ++h) {
    const HeadSeeds seeds = head_seeds(config.seed, h);
    w.key(head_for(config.heads[h], config.cohort.k).name()).begin_object();
    w.key("init_mc").value(seeds.init_mc);
    w.key("train_mc").value(seeds.train_mc);
    w.key("predict_mc").value(seeds.predict_mc);
    w.key("init_baseline").value(seeds.init_baseline);
    w.key("train_baseline").value(seeds.train_baseline);
    w.key("predict_baseline").value(seeds.predict_baseline);
    w.key("report_mc").value(seeds.report_mc);
    w.key("report_baseline").value(seeds.report_baseline);
    w.end_object();
  }
  w.end_object();
  w.end_object();

  std::vector<std::pair<std::string, const std::filesystem::path*>> listed;
  listed.reserve(result.files.size());
  for (const std::filesystem::path& path : result.files) {
    listed.emplace_back(path.lexically_relative(out_dir).generic_string(), &path);
  }
  std::sort(listed.begin(), listed.end());
  w.key("files").begin_array();
  for (const auto& [relative, path] : listed) {
    const std::string content = read_file(*path);
    w.begin_object();
    w.key("path").value(relative);
    w.key("bytes").value(static_cast<std::uint64_t>(content.size()));
    w.key("fnv1a64").value(hex64(fnv1a64(content)));
    w.end_object();
  }
  w.end_array();
  w.end_object();

  result.manifest_path = out_dir / "manifest.json";
  write_file(result.manifest_path, w.str());
  return result;
}

}  // namespace repeatlab::simlab
