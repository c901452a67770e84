#include "repeatlab/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "repeatlab/errors.hpp"
#include "repeatlab/jsonio.hpp"
#include "repeatlab/metrics.hpp"
#include "repeatlab/repeatability.hpp"
#include "repeatlab/scoring.hpp"

namespace repeatlab::simlab {

namespace {

constexpr double kLogClamp = 1e-12;

std::string padded_number(int value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) {
    digits.insert(digits.begin(), static_cast<std::size_t>(width) - digits.size(), '0');
  }
  return digits;
}

int digits_of(int value) { return static_cast<int>(std::to_string(value).size()); }

double sigmoid(double z) {
  // Stable in both tails.
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_clamped(double p) { return std::log(std::clamp(p, kLogClamp, 1.0 - kLogClamp)); }

void check_cohort_config(const CohortConfig& cfg) {
  if (cfg.n_subjects < 2) throw_args("cohort needs at least 2 subjects");
  if (cfg.images_per_subject < 2) throw_args("cohort needs at least 2 images per subject");
  if (cfg.k < 2) throw_args("cohort needs k >= 2");
  if (cfg.feature_dim < 1) throw_args("cohort needs feature_dim >= 1");
  if (cfg.image_noise_sigma < 0.0) throw_args("image_noise_sigma must be non-negative");
  if (cfg.label_noise_rate < 0.0 || cfg.label_noise_rate >= 0.5) {
    throw_args("label_noise_rate must be in [0, 0.5)");
  }
  if (cfg.train_fraction <= 0.0 || cfg.val_fraction < 0.0 ||
      cfg.train_fraction + cfg.val_fraction >= 1.0) {
    throw_args("split fractions must satisfy 0 < train, 0 <= val, train + val < 1");
  }
}

}  // namespace

std::string split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  throw_args("invalid split");
}

std::vector<const CohortSubject*> SyntheticCohort::subjects_in(Split split) const {
  std::vector<const CohortSubject*> result;
  for (const CohortSubject& subject : subjects) {
    if (subject.split == split) result.push_back(&subject);
  }
  return result;
}

int default_binary_boundary(int k) {
  if (k < 2) throw_args("binary boundary needs k >= 2");
  return k / 2;
}

SyntheticCohort generate_cohort(const CohortConfig& cfg) {
  check_cohort_config(cfg);
  SyntheticCohort cohort;
  cohort.config = cfg;
  cohort.subjects.resize(static_cast<std::size_t>(cfg.n_subjects));

  const double span = static_cast<double>(cfg.k - 1);
  const double bin_width = span / static_cast<double>(cfg.k);

  // Fixed substreams so each generation stage is independent of the others.
  Rng rng_latent(derive_stream(cfg.seed, 0));
  Rng rng_embed(derive_stream(cfg.seed, 1));
  Rng rng_noise(derive_stream(cfg.seed, 2));
  Rng rng_flip(derive_stream(cfg.seed, 3));
  Rng rng_split(derive_stream(cfg.seed, 4));

  // Seeded nonlinear embedding g: [0, k-1] -> R^d, one sinusoid plus a
  // linear ramp per dimension. Rich enough to be learnable, nonlinear
  // enough that class regions are not trivially separable.
  struct EmbeddingDim {
    double omega, phase, ramp;
  };
  std::vector<EmbeddingDim> embedding(static_cast<std::size_t>(cfg.feature_dim));
  for (EmbeddingDim& dim : embedding) {
    dim.omega = rng_embed.uniform(0.5, 2.5);
    dim.phase = rng_embed.uniform(0.0, 2.0 * std::numbers::pi);
    dim.ramp = rng_embed.uniform(-0.5, 0.5);
  }

  const int subject_width = digits_of(cfg.n_subjects);
  const int image_width = digits_of(cfg.images_per_subject);
  for (int s = 0; s < cfg.n_subjects; ++s) {
    CohortSubject& subject = cohort.subjects[static_cast<std::size_t>(s)];
    subject.subject_id = "s" + padded_number(s + 1, subject_width);
    subject.session_id = "v1";
    subject.latent = rng_latent.uniform(0.0, span);
  }
  for (CohortSubject& subject : cohort.subjects) {
    subject.images.resize(static_cast<std::size_t>(cfg.images_per_subject));
    for (int i = 0; i < cfg.images_per_subject; ++i) {
      CohortImage& image = subject.images[static_cast<std::size_t>(i)];
      image.image_id = "img" + padded_number(i + 1, image_width);
      image.features.resize(static_cast<std::size_t>(cfg.feature_dim));
      for (int j = 0; j < cfg.feature_dim; ++j) {
        const EmbeddingDim& dim = embedding[static_cast<std::size_t>(j)];
        const double clean = std::sin(dim.omega * subject.latent + dim.phase) +
                             dim.ramp * subject.latent;
        image.features[static_cast<std::size_t>(j)] =
            clean + cfg.image_noise_sigma * rng_noise.normal();
      }
    }
  }
  for (CohortSubject& subject : cohort.subjects) {
    int label = bin_width > 0.0
                    ? std::min(cfg.k - 1, static_cast<int>(subject.latent / bin_width))
                    : 0;
    // Boundary label noise: one draw per subject so cohorts with different
    // rates share everything else.
    const double draw = rng_flip.uniform();
    int nearest = 0;
    double nearest_distance = std::numeric_limits<double>::infinity();
    for (int j = 1; j < cfg.k; ++j) {
      const double boundary = bin_width * static_cast<double>(j);
      const double distance = std::abs(subject.latent - boundary);
      if (distance < nearest_distance) {
        nearest_distance = distance;
        nearest = j;
      }
    }
    if (nearest_distance <= 0.1 * bin_width && draw < cfg.label_noise_rate) {
      const double boundary = bin_width * static_cast<double>(nearest);
      label += subject.latent < boundary ? 1 : -1;
    }
    subject.label = std::clamp(label, 0, cfg.k - 1);
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(cfg.n_subjects));
  std::iota(order.begin(), order.end(), 0);
  rng_split.shuffle(order);
  const int n_train = static_cast<int>(cfg.train_fraction * cfg.n_subjects);
  const int n_val = static_cast<int>(cfg.val_fraction * cfg.n_subjects);
  for (int rank = 0; rank < cfg.n_subjects; ++rank) {
    Split split = Split::test;
    if (rank < n_train) {
      split = Split::train;
    } else if (rank < n_train + n_val) {
      split = Split::val;
    }
    cohort.subjects[order[static_cast<std::size_t>(rank)]].split = split;
  }
  return cohort;
}

LabelMap cohort_labels(const SyntheticCohort& cohort, Split split, int binarize_boundary) {
  if (binarize_boundary < 0 || binarize_boundary >= cohort.config.k) {
    throw_args("binarize boundary must be 0 (off) or in [1, k-1]");
  }
  LabelMap labels;
  for (const CohortSubject* subject : cohort.subjects_in(split)) {
    const int label = binarize_boundary > 0 ? (subject->label >= binarize_boundary ? 1 : 0)
                                            : subject->label;
    for (const CohortImage& image : subject->images) {
      labels[{subject->subject_id, subject->session_id, image.image_id}] = label;
    }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// MLP

struct MlpModel::ForwardCache {
  // activations[0] is the input; activations[l + 1] the post-dropout output
  // of hidden layer l. One pre-activation and mask vector per hidden layer.
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> pre_activations;
  std::vector<std::vector<double>> masks;  // dropout scale per unit (0 or 1/(1-p))
  std::vector<double> head_pre;
  std::vector<double> output;
};

MlpModel::MlpModel(const MlpConfig& config, std::uint64_t init_seed) : config_(config) {
  if (config.input_dim < 1) throw_args("input_dim must be positive");
  if (config.dropout_rate < 0.0 || config.dropout_rate >= 1.0) {
    throw_args("dropout_rate must be in [0, 1)");
  }
  for (int size : config.hidden_sizes) {
    if (size < 1) throw_args("hidden layer sizes must be positive");
  }
  if (config.head.num_classes < 2) throw_args("head needs k >= 2");
  if (config.head.type == HeadType::binary && config.head.num_classes != 2) {
    throw_args("binary head requires k = 2");
  }

  Rng rng(init_seed);
  int in = config.input_dim;
  for (int size : config.hidden_sizes) {
    Layer layer;
    layer.in = in;
    layer.out = size;
    layer.weights.resize(static_cast<std::size_t>(in) * static_cast<std::size_t>(size));
    const double scale = std::sqrt(2.0 / static_cast<double>(in));  // He init for ReLU
    for (double& w : layer.weights) w = rng.normal(0.0, scale);
    layer.biases.assign(static_cast<std::size_t>(size), 0.0);
    layers_.push_back(std::move(layer));
    in = size;
  }
  Layer head;
  head.in = in;
  const int k = config.head.num_classes;
  switch (config.head.type) {
    case HeadType::binary:
    case HeadType::regression:
      head.out = 1;
      break;
    case HeadType::multiclass:
      head.out = k;
      break;
    case HeadType::ordinal:
      head.out = 1;  // one shared weight row; per-rank biases below
      break;
  }
  head.weights.resize(static_cast<std::size_t>(head.in) * static_cast<std::size_t>(head.out));
  const double scale = std::sqrt(2.0 / static_cast<double>(head.in));
  for (double& w : head.weights) w = rng.normal(0.0, scale);
  const int n_biases = config.head.type == HeadType::ordinal ? k - 1 : head.out;
  head.biases.assign(static_cast<std::size_t>(n_biases), 0.0);
  layers_.push_back(std::move(head));
}

std::vector<double> MlpModel::forward_impl(std::span<const double> x, bool dropout_enabled,
                                           Rng* rng, ForwardCache* cache) const {
  if (static_cast<int>(x.size()) != config_.input_dim) {
    throw_args("input has " + std::to_string(x.size()) + " features, expected " +
               std::to_string(config_.input_dim));
  }
  const double rate = config_.dropout_rate;
  const bool masking = dropout_enabled && rate > 0.0;
  if (masking && rng == nullptr) throw_args("dropout-enabled forward pass needs an rng");

  std::vector<double> current(x.begin(), x.end());
  if (cache) {
    cache->activations.clear();
    cache->pre_activations.clear();
    cache->masks.clear();
    cache->activations.push_back(current);
  }
  const std::size_t n_hidden = layers_.size() - 1;
  for (std::size_t l = 0; l < n_hidden; ++l) {
    const Layer& layer = layers_[l];
    std::vector<double> pre(static_cast<std::size_t>(layer.out));
    for (int o = 0; o < layer.out; ++o) {
      double z = layer.biases[static_cast<std::size_t>(o)];
      const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) z += row[i] * current[static_cast<std::size_t>(i)];
      pre[static_cast<std::size_t>(o)] = z;
    }
    std::vector<double> mask;
    if (masking) {
      mask.resize(static_cast<std::size_t>(layer.out));
      for (double& m : mask) m = rng->uniform() < rate ? 0.0 : 1.0 / (1.0 - rate);
    }
    std::vector<double> post(static_cast<std::size_t>(layer.out));
    for (int o = 0; o < layer.out; ++o) {
      double a = pre[static_cast<std::size_t>(o)] > 0.0 ? pre[static_cast<std::size_t>(o)] : 0.0;
      if (masking) a *= mask[static_cast<std::size_t>(o)];
      post[static_cast<std::size_t>(o)] = a;
    }
    if (cache) {
      cache->pre_activations.push_back(std::move(pre));
      cache->masks.push_back(std::move(mask));
      cache->activations.push_back(post);
    }
    current = std::move(post);
  }

  const Layer& head = layers_.back();
  const int k = config_.head.num_classes;
  std::vector<double> head_pre;
  if (config_.head.type == HeadType::ordinal) {
    double shared = 0.0;
    for (int i = 0; i < head.in; ++i) {
      shared += head.weights[static_cast<std::size_t>(i)] * current[static_cast<std::size_t>(i)];
    }
    head_pre.resize(static_cast<std::size_t>(k - 1));
    for (int j = 0; j < k - 1; ++j) {
      head_pre[static_cast<std::size_t>(j)] = shared + head.biases[static_cast<std::size_t>(j)];
    }
  } else {
    head_pre.resize(static_cast<std::size_t>(head.out));
    for (int o = 0; o < head.out; ++o) {
      double z = head.biases[static_cast<std::size_t>(o)];
      const double* row = head.weights.data() + static_cast<std::size_t>(o) * head.in;
      for (int i = 0; i < head.in; ++i) z += row[i] * current[static_cast<std::size_t>(i)];
      head_pre[static_cast<std::size_t>(o)] = z;
    }
  }

  std::vector<double> output;
  switch (config_.head.type) {
    case HeadType::binary:
      output = {sigmoid(head_pre[0])};
      break;
    case HeadType::multiclass: {
      output.resize(head_pre.size());
      const double peak = *std::max_element(head_pre.begin(), head_pre.end());
      double total = 0.0;
      for (std::size_t c = 0; c < head_pre.size(); ++c) {
        output[c] = std::exp(head_pre[c] - peak);
        total += output[c];
      }
      for (double& p : output) p /= total;
      break;
    }
    case HeadType::ordinal:
      output.resize(head_pre.size());
      for (std::size_t j = 0; j < head_pre.size(); ++j) output[j] = sigmoid(head_pre[j]);
      break;
    case HeadType::regression:
      output = {head_pre[0]};
      break;
  }
  if (cache) {
    cache->head_pre = std::move(head_pre);
    cache->output = output;
  }
  return output;
}

std::vector<double> MlpModel::forward(std::span<const double> x, bool dropout_enabled,
                                      Rng* rng) const {
  return forward_impl(x, dropout_enabled, rng, nullptr);
}

std::vector<double> MlpModel::forward_deterministic(std::span<const double> x) const {
  return forward_impl(x, false, nullptr, nullptr);
}

int MlpModel::parameter_count() const {
  std::size_t count = 0;
  for (const Layer& layer : layers_) count += layer.weights.size() + layer.biases.size();
  return static_cast<int>(count);
}

std::vector<double> MlpModel::parameters() const {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(parameter_count()));
  for (const Layer& layer : layers_) {
    flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
    flat.insert(flat.end(), layer.biases.begin(), layer.biases.end());
  }
  return flat;
}

void MlpModel::set_parameters(std::span<const double> flat) {
  if (static_cast<int>(flat.size()) != parameter_count()) {
    throw_args("parameter vector has wrong length");
  }
  std::size_t offset = 0;
  for (Layer& layer : layers_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), layer.weights.size(),
                layer.weights.begin());
    offset += layer.weights.size();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), layer.biases.size(),
                layer.biases.begin());
    offset += layer.biases.size();
  }
}

void MlpModel::enforce_ordinal_bias_order() {
  if (config_.head.type != HeadType::ordinal) return;
  std::vector<double>& biases = layers_.back().biases;
  std::sort(biases.begin(), biases.end(), std::greater<double>());
}

LossKind default_loss(const HeadKind& head) {
  switch (head.type) {
    case HeadType::binary: return LossKind::bce;
    case HeadType::multiclass: return LossKind::ce;
    case HeadType::ordinal: return LossKind::coral;
    case HeadType::regression: return LossKind::mse;
  }
  throw_args("invalid head type");
}

std::string loss_name(LossKind loss) {
  switch (loss) {
    case LossKind::bce: return "bce";
    case LossKind::ce: return "ce";
    case LossKind::coral: return "coral";
    case LossKind::mse: return "mse";
  }
  throw_args("invalid loss");
}

namespace {

void check_loss_matches_head(LossKind loss, const HeadKind& head) {
  if (default_loss(head) != loss) {
    throw_args("loss " + loss_name(loss) + " is inconsistent with a " + head.name() + " head");
  }
}

// dL/d(head_pre) and the loss value for one example.
double head_delta(const HeadKind& head, LossKind loss, const std::vector<double>& output,
                  int label, int binary_boundary, std::vector<double>& delta) {
  const int k = head.num_classes;
  switch (loss) {
    case LossKind::bce: {
      const int y = label >= binary_boundary ? 1 : 0;
      const double p = output[0];
      delta = {p - static_cast<double>(y)};
      return -(y * log_clamped(p) + (1 - y) * std::log(std::clamp(1.0 - p, kLogClamp, 1.0)));
    }
    case LossKind::ce: {
      if (label < 0 || label >= k) throw_args("label outside [0, k-1]");
      delta.assign(output.size(), 0.0);
      for (std::size_t c = 0; c < output.size(); ++c) {
        delta[c] = output[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
      }
      return -log_clamped(output[static_cast<std::size_t>(label)]);
    }
    case LossKind::coral: {
      if (label < 0 || label >= k) throw_args("label outside [0, k-1]");
      delta.assign(output.size(), 0.0);
      double loss_sum = 0.0;
      for (std::size_t j = 0; j < output.size(); ++j) {
        const double target = label > static_cast<int>(j) ? 1.0 : 0.0;
        delta[j] = output[j] - target;
        loss_sum -= target * log_clamped(output[j]) +
                    (1.0 - target) * std::log(std::clamp(1.0 - output[j], kLogClamp, 1.0));
      }
      return loss_sum;
    }
    case LossKind::mse: {
      const double target = static_cast<double>(label);
      const double diff = output[0] - target;
      delta = {2.0 * diff};
      return diff * diff;
    }
  }
  throw_args("invalid loss");
}

}  // namespace

// Friend of MlpModel; hosts everything that needs the cached forward pass.
struct MlpGradients {
  static LossGradient run(const MlpModel& model, std::span<const double> x, int label,
                          LossKind loss, bool dropout_enabled, Rng* rng, int binary_boundary);
};

LossGradient MlpGradients::run(const MlpModel& model, std::span<const double> x, int label,
                               LossKind loss, bool dropout_enabled, Rng* rng,
                               int binary_boundary) {
  check_loss_matches_head(loss, model.config().head);
  MlpModel::ForwardCache cache;
  model.forward_impl(x, dropout_enabled, rng, &cache);

  std::vector<double> delta;  // dL/d(head_pre)
  LossGradient result;
  result.loss = head_delta(model.config().head, loss, cache.output, label, binary_boundary, delta);

  // Backward pass. Gradient layout mirrors MlpModel::parameters().
  const auto& layers = model.layers_;
  std::vector<std::vector<double>> weight_grads(layers.size());
  std::vector<std::vector<double>> bias_grads(layers.size());

  const std::size_t head_index = layers.size() - 1;
  const auto& head = layers[head_index];
  const std::vector<double>& head_input = cache.activations.back();
  std::vector<double> grad_input(static_cast<std::size_t>(head.in), 0.0);
  if (model.config().head.type == HeadType::ordinal) {
    double delta_sum = 0.0;
    for (double d : delta) delta_sum += d;
    weight_grads[head_index].resize(head.weights.size());
    for (int i = 0; i < head.in; ++i) {
      weight_grads[head_index][static_cast<std::size_t>(i)] =
          delta_sum * head_input[static_cast<std::size_t>(i)];
      grad_input[static_cast<std::size_t>(i)] =
          delta_sum * head.weights[static_cast<std::size_t>(i)];
    }
    bias_grads[head_index] = delta;
  } else {
    weight_grads[head_index].resize(head.weights.size());
    bias_grads[head_index] = delta;
    for (int o = 0; o < head.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      const double* row = head.weights.data() + static_cast<std::size_t>(o) * head.in;
      double* grad_row = weight_grads[head_index].data() + static_cast<std::size_t>(o) * head.in;
      for (int i = 0; i < head.in; ++i) {
        grad_row[i] = d * head_input[static_cast<std::size_t>(i)];
        grad_input[static_cast<std::size_t>(i)] += d * row[i];
      }
    }
  }

  for (std::size_t l = head_index; l-- > 0;) {
    const auto& layer = layers[l];
    const std::vector<double>& pre = cache.pre_activations[l];
    const std::vector<double>& mask = cache.masks[l];
    const std::vector<double>& input = cache.activations[l];
    std::vector<double> grad_pre(static_cast<std::size_t>(layer.out));
    for (int o = 0; o < layer.out; ++o) {
      double g = grad_input[static_cast<std::size_t>(o)];
      if (!mask.empty()) g *= mask[static_cast<std::size_t>(o)];
      if (pre[static_cast<std::size_t>(o)] <= 0.0) g = 0.0;
      grad_pre[static_cast<std::size_t>(o)] = g;
    }
    weight_grads[l].resize(layer.weights.size());
    bias_grads[l] = grad_pre;
    std::vector<double> grad_prev(static_cast<std::size_t>(layer.in), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double g = grad_pre[static_cast<std::size_t>(o)];
      const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
      double* grad_row = weight_grads[l].data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) {
        grad_row[i] = g * input[static_cast<std::size_t>(i)];
        grad_prev[static_cast<std::size_t>(i)] += g * row[i];
      }
    }
    grad_input = std::move(grad_prev);
  }

  result.gradient.reserve(static_cast<std::size_t>(model.parameter_count()));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    result.gradient.insert(result.gradient.end(), weight_grads[l].begin(), weight_grads[l].end());
    result.gradient.insert(result.gradient.end(), bias_grads[l].begin(), bias_grads[l].end());
  }
  return result;
}

LossGradient loss_and_gradient(const MlpModel& model, std::span<const double> x, int label,
                               LossKind loss, bool dropout_enabled, Rng* rng,
                               int binary_boundary) {
  return MlpGradients::run(model, x, label, loss, dropout_enabled, rng, binary_boundary);
}

double loss_value(const MlpModel& model, std::span<const double> x, int label, LossKind loss,
                  int binary_boundary) {
  check_loss_matches_head(loss, model.config().head);
  const std::vector<double> output = model.forward_deterministic(x);
  std::vector<double> delta;
  return head_delta(model.config().head, loss, output, label, binary_boundary, delta);
}

TrainResult train(MlpModel& model, const SyntheticCohort& cohort, const TrainConfig& cfg) {
  check_loss_matches_head(cfg.loss, model.config().head);
  if (cfg.epochs < 0) throw_args("epochs must be non-negative");
  if (cfg.batch_size < 1) throw_args("batch_size must be positive");
  if (cfg.learning_rate < 0.0) throw_args("learning_rate must be non-negative");
  if (model.config().input_dim != cohort.config.feature_dim) {
    throw_args("model input_dim does not match the cohort feature_dim");
  }
  const HeadKind& head = model.config().head;
  if (head.type != HeadType::binary && head.num_classes != cohort.config.k) {
    throw_args("model k does not match the cohort k");
  }
  const int boundary = head.type == HeadType::binary
                           ? (cfg.binary_boundary < 0 ? default_binary_boundary(cohort.config.k)
                                                      : cfg.binary_boundary)
                           : 0;
  if (head.type == HeadType::binary &&
      (boundary < 1 || boundary > cohort.config.k - 1)) {
    throw_args("binary_boundary must be in [1, k-1]");
  }

  struct Example {
    const std::vector<double>* features;
    int label;
  };
  std::vector<Example> examples;
  for (const CohortSubject* subject : cohort.subjects_in(Split::train)) {
    for (const CohortImage& image : subject->images) {
      examples.push_back({&image.features, subject->label});
    }
  }
  if (examples.empty()) throw_args("training split is empty");

  Rng rng(cfg.seed);
  const bool use_dropout = model.config().dropout_rate > 0.0;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  std::vector<double> params = model.parameters();
  std::vector<double> batch_grad(params.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t batch_end =
          std::min(order.size(), cursor + static_cast<std::size_t>(cfg.batch_size));
      std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
      const double batch_n = static_cast<double>(batch_end - cursor);
      for (std::size_t b = cursor; b < batch_end; ++b) {
        const Example& example = examples[order[b]];
        LossGradient lg = loss_and_gradient(model, *example.features, example.label, cfg.loss,
                                            use_dropout, &rng, boundary);
        epoch_loss += lg.loss;
        for (std::size_t p = 0; p < batch_grad.size(); ++p) batch_grad[p] += lg.gradient[p];
      }
      for (std::size_t p = 0; p < params.size(); ++p) {
        params[p] -= cfg.learning_rate * batch_grad[p] / batch_n;
      }
      model.set_parameters(params);
      model.enforce_ordinal_bias_order();
      if (head.type == HeadType::ordinal) params = model.parameters();  // biases re-sorted
      cursor = batch_end;
    }
    epoch_loss /= static_cast<double>(examples.size());
    if (!std::isfinite(epoch_loss)) {
      throw_degenerate("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    }
    result.loss_history.push_back(epoch_loss);
  }
  return result;
}

RecordSet predict_records(const MlpModel& model, const SyntheticCohort& cohort, Split split,
                          int n_mc, std::uint64_t seed, bool include_deterministic) {
  if (n_mc < 0) throw_args("n_mc must be non-negative");
  if (n_mc == 0 && !include_deterministic) {
    throw_args("n_mc = 0 requires the deterministic row");
  }
  if (model.config().input_dim != cohort.config.feature_dim) {
    throw_args("model input_dim does not match the cohort feature_dim");
  }
  const HeadKind head = model.config().head;
  RecordSet set;
  std::uint64_t image_ordinal = 0;
  for (const CohortSubject* subject : cohort.subjects_in(split)) {
    for (const CohortImage& image : subject->images) {
      Rng rng(derive_stream(seed, image_ordinal));
      ++image_ordinal;
      PredictionRecord base;
      base.subject_id = subject->subject_id;
      base.session_id = subject->session_id;
      base.image_id = image.image_id;
      base.head = head;
      if (include_deterministic) {
        PredictionRecord r = base;
        r.mc_index = kDeterministic;
        r.outputs = model.forward_deterministic(image.features);
        set.records.push_back(std::move(r));
      }
      for (int t = 0; t < n_mc; ++t) {
        PredictionRecord r = base;
        r.mc_index = t;
        r.outputs = model.forward(image.features, true, &rng);
        set.records.push_back(std::move(r));
      }
    }
  }
  return set;
}

namespace {

struct AlignedEvaluation {
  std::vector<int> labels;
  std::vector<int> classes;
};

// Per-image label/class vectors in group-then-image order; errors list the
// images missing a label.
AlignedEvaluation align_labels(const std::vector<SessionGroup>& groups,
                               const std::map<ImageKey, ImageScore>& scored,
                               const LabelMap& labels, int k) {
  AlignedEvaluation aligned;
  std::vector<std::string> missing;
  for (const SessionGroup& group : groups) {
    for (const ImageRecords& image : group.images) {
      const ImageKey key{group.subject_id, group.session_id, image.image_id};
      const auto label_it = labels.find(key);
      if (label_it == labels.end()) {
        missing.push_back(group.subject_id + "/" + group.session_id + "/" + image.image_id);
        continue;
      }
      if (label_it->second < 0 || label_it->second >= k) {
        throw_args("label " + std::to_string(label_it->second) + " for image " +
                   group.subject_id + "/" + group.session_id + "/" + image.image_id +
                   " outside [0, " + std::to_string(k - 1) + "]");
      }
      aligned.labels.push_back(label_it->second);
      aligned.classes.push_back(scored.at(key).assigned_class);
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
  return aligned;
}

}  // namespace

std::vector<SweepRow> mc_sweep(const RecordSet& records, const LabelMap& labels,
                               std::vector<int> pass_counts) {
  if (records.empty()) throw_args("sweep needs a non-empty record set");
  if (pass_counts.empty()) throw_args("sweep needs at least one pass count");
  for (int n : pass_counts) {
    if (n < 1) throw_args("pass counts must be positive");
  }
  std::sort(pass_counts.begin(), pass_counts.end());
  pass_counts.erase(std::unique(pass_counts.begin(), pass_counts.end()), pass_counts.end());
  if (!records.has_deterministic()) {
    throw_args("sweep needs deterministic baseline rows in the record set");
  }

  const HeadKind head = *records.head();
  const double range = head.range_high() - head.range_low();
  const std::vector<SessionGroup> groups = group_by_session(records);

  std::vector<SweepRow> rows;
  const auto evaluate = [&](bool use_mc, int n_use, int row_n_mc) {
    const std::map<ImageKey, ImageScore> scored = score_images(groups, use_mc, n_use);
    std::map<ImageKey, double> scores;
    std::map<ImageKey, int> classes;
    for (const auto& [key, image_score] : scored) {
      scores[key] = image_score.score;
      classes[key] = image_score.assigned_class;
    }
    const RepeatabilityResult summary = repeatability_summary(groups, scores, classes, range);
    const AlignedEvaluation aligned = align_labels(groups, scored, labels, head.num_classes);
    SweepRow row;
    row.n_mc = row_n_mc;
    row.loa = summary.loa_halfwidth_normalized;
    row.disagreement = summary.disagreement;
    row.accuracy = accuracy(aligned.labels, aligned.classes);
    row.kappa = quadratic_weighted_kappa(
        ConfusionMatrix::from_pairs(aligned.labels, aligned.classes, head.num_classes));
    rows.push_back(row);
  };

  for (int n : pass_counts) evaluate(true, n, n);
  evaluate(false, 1, -1);
  return rows;
}

void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw_io("cannot open '" + path.string() + "' for writing");
  out << "n_mc,loa,disagreement,accuracy,kappa\n";
  for (const SweepRow& row : rows) {
    out << row.n_mc << ',' << format_g9(row.loa) << ',' << format_g9(row.disagreement) << ','
        << format_g9(row.accuracy) << ',' << format_g9(row.kappa) << "\n";
  }
  if (!out) throw_io("failed writing '" + path.string() + "'");
}

}  // namespace repeatlab::simlab
