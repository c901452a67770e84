#pragma once

// Desk-scale experiment engine: synthetic test-retest cohorts, a small
// trainable dropout MLP with four output heads, stochastic-forward-pass
// record generation, and the passes-per-image sweep.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "repeatlab/records.hpp"
#include "repeatlab/rng.hpp"

namespace repeatlab::simlab {

// ---------------------------------------------------------------------------
// Synthetic cohorts

struct CohortConfig {
  int n_subjects = 500;
  int images_per_subject = 2;  // >= 2 so every session is test-retest eligible
  int k = 3;                   // label alphabet / severity range [0, k-1]
  int feature_dim = 16;
  // Per-image feature noise (same-session variation). The default puts the
  // deterministic baseline's disagreement rate in the 0.15-0.35 band on the
  // default multi-class and ordinal tasks.
  double image_noise_sigma = 0.45;
  double label_noise_rate = 0.25;  // flip chance near bin boundaries, in [0, 0.5)
  double train_fraction = 0.65;     // split by subject: train/val/test
  double val_fraction = 0.10;
  std::uint64_t seed = 1;
};

enum class Split { train, val, test };

std::string split_name(Split split);

struct CohortImage {
  std::string image_id;
  std::vector<double> features;
};

struct CohortSubject {
  std::string subject_id;
  std::string session_id;  // one test-retest session per subject
  double latent = 0.0;     // severity u in [0, k-1]; shared by the subject's images
  int label = 0;
  Split split = Split::train;
  std::vector<CohortImage> images;
};

struct SyntheticCohort {
  CohortConfig config;
  std::vector<CohortSubject> subjects;

  std::vector<const CohortSubject*> subjects_in(Split split) const;
};

// Deterministic for a fixed config: subject latents u ~ Uniform(0, k-1); a
// seeded nonlinear embedding g maps u to feature space; each image is
// g(u) + N(0, sigma^2 I) drawn independently; labels bin u into k equal
// intervals of [0, k-1] and may flip to the adjacent class (probability
// label_noise_rate) only when u lies within 10% of a bin width of an
// interior boundary; subjects are shuffled into train/val/test by subject.
SyntheticCohort generate_cohort(const CohortConfig& config);

// Labels of one split keyed for evaluation. With binarize_boundary >= 1 the
// label becomes 1[label >= boundary] (used by binary heads on k > 2 cohorts).
LabelMap cohort_labels(const SyntheticCohort& cohort, Split split, int binarize_boundary = 0);

// Default binary grouping of a k-class scale: classes >= k/2 are positive.
int default_binary_boundary(int k);

// ---------------------------------------------------------------------------
// Dropout MLP

struct MlpConfig {
  int input_dim = 16;
  std::vector<int> hidden_sizes = {64, 64};
  HeadKind head = HeadKind::multiclass(3);
  double dropout_rate = 0.1;  // in [0, 1); applied to hidden activations
};

class MlpModel {
 public:
  // He-initialized weights from the given seed; biases start at zero.
  MlpModel(const MlpConfig& config, std::uint64_t init_seed);

  const MlpConfig& config() const { return config_; }

  // Post-activation head output: sigmoid (binary), softmax (multiclass),
  // per-rank sigmoid of shared-weight logits (ordinal), identity
  // (regression). With dropout enabled, hidden activations are masked and
  // scaled by 1/(1-rate) (inverted dropout); rng drives the masks.
  std::vector<double> forward(std::span<const double> x, bool dropout_enabled, Rng* rng) const;
  std::vector<double> forward_deterministic(std::span<const double> x) const;

  int parameter_count() const;

  // Flat parameter access (training, gradient checks, serialization).
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);

  // Ordinal rank-consistency: cumulative-unit biases kept non-increasing.
  // Called after every optimizer step; no-op for other heads.
  void enforce_ordinal_bias_order();

 private:
  friend struct MlpGradients;

  struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> biases;   // out
  };

  // Hidden layers followed by the head layer. For the ordinal head the
  // layer has a single shared weight row (out = 1) but k-1 biases.
  std::vector<Layer> layers_;
  MlpConfig config_;

  struct ForwardCache;
  std::vector<double> forward_impl(std::span<const double> x, bool dropout_enabled, Rng* rng,
                                   ForwardCache* cache) const;
};

enum class LossKind { bce, ce, coral, mse };

LossKind default_loss(const HeadKind& head);
std::string loss_name(LossKind loss);

struct TrainConfig {
  int epochs = 120;
  int batch_size = 32;
  double learning_rate = 0.05;
  LossKind loss = LossKind::ce;
  std::uint64_t seed = 1;
  // Binary heads on k > 2 cohorts train against 1[label >= boundary];
  // -1 selects default_binary_boundary(k).
  int binary_boundary = -1;
};

struct TrainResult {
  std::vector<double> loss_history;  // mean training loss per epoch
};

// Mini-batch SGD with dropout active during training (single-threaded,
// deterministic batch order from cfg.seed). Loss must match the model head
// (bce-binary, ce-multiclass, coral-ordinal, mse-regression). Non-finite
// loss raises an error naming the epoch.
TrainResult train(MlpModel& model, const SyntheticCohort& cohort, const TrainConfig& cfg);

// Per-example loss and parameter gradient at one (x, label) pair, with
// dropout masks drawn from `rng` when enabled (used by training and the
// finite-difference checks; gradients are exact for fixed masks).
struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // flat, aligned with MlpModel::parameters()
};
LossGradient loss_and_gradient(const MlpModel& model, std::span<const double> x, int label,
                               LossKind loss, bool dropout_enabled, Rng* rng,
                               int binary_boundary);

// Loss alone at fixed dropout masks is not reproducible through the public
// API (masks are consumed from rng); the finite-difference tests use
// dropout_enabled = false.
double loss_value(const MlpModel& model, std::span<const double> x, int label, LossKind loss,
                  int binary_boundary);

// ---------------------------------------------------------------------------
// Record generation and the passes-per-image sweep

// For each image of the split (subject order, then image order): n_mc
// stochastic passes (mc_index 0..n_mc-1) from the image's own substream
// derive_stream(seed, image_ordinal), plus one deterministic row when
// requested. n_mc = 0 requires include_deterministic.
RecordSet predict_records(const MlpModel& model, const SyntheticCohort& cohort, Split split,
                          int n_mc, std::uint64_t seed, bool include_deterministic);

struct SweepRow {
  int n_mc = 0;  // -1 for the deterministic baseline row
  double loa = 0.0;  // normalized LoA half-width
  double disagreement = 0.0;
  double accuracy = 0.0;
  double kappa = 0.0;
};

// One row per requested pass count (sorted ascending, deduplicated), each
// aggregating the first N stochastic passes, plus the deterministic baseline
// row last (the record set must contain deterministic rows).
std::vector<SweepRow> mc_sweep(const RecordSet& records, const LabelMap& labels,
                               std::vector<int> pass_counts);

void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);

}  // namespace repeatlab::simlab
