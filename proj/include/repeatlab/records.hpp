#pragma once

// Prediction records: one row per (image, forward pass). A record either
// carries one of several stochastic forward passes of the same image
// (mc_index = 0, 1, ...) or a single deterministic pass (mc_index = -1,
// written as the sentinel in files). Images nest in sessions, sessions in
// subjects; repeated sessions of one subject are what repeatability compares.

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace repeatlab {

inline constexpr int kDeterministic = -1;

enum class HeadType { binary, multiclass, ordinal, regression };

// Output-head descriptor: what the raw model outputs mean and how many there
// are. `num_classes` is the label alphabet size k (2 for binary).
struct HeadKind {
  HeadType type = HeadType::binary;
  int num_classes = 2;

  static HeadKind binary() { return {HeadType::binary, 2}; }
  static HeadKind multiclass(int k) { return {HeadType::multiclass, k}; }
  static HeadKind ordinal(int k) { return {HeadType::ordinal, k}; }
  static HeadKind regression(int k) { return {HeadType::regression, k}; }

  // Number of raw outputs a record of this head carries: k class
  // probabilities (multiclass), k-1 cumulative probabilities (ordinal),
  // or a single value (binary, regression).
  int output_arity() const;

  // Severity scores for this head live in [range_low, range_high]:
  // [0, 1] for binary, [0, k-1] otherwise.
  double range_low() const { return 0.0; }
  double range_high() const;

  std::string name() const;
  static HeadType parse_type(const std::string& name);

  bool operator==(const HeadKind&) const = default;
};

struct PredictionRecord {
  std::string subject_id;
  std::string session_id;
  std::string image_id;
  HeadKind head;
  int mc_index = kDeterministic;
  std::vector<double> outputs;

  bool deterministic() const { return mc_index == kDeterministic; }
};

// All records of one image within one session.
struct ImageRecords {
  std::string image_id;
  std::vector<PredictionRecord> records;
};

// All images of one (subject, session) pair.
struct SessionGroup {
  std::string subject_id;
  std::string session_id;
  std::vector<ImageRecords> images;
};

struct RecordSet {
  std::vector<PredictionRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  // Head shared by all records; nullopt when empty.
  std::optional<HeadKind> head() const;
  bool has_deterministic() const;
  bool has_mc() const;
};

enum class FileFormat { csv, json };

// .csv / .json by extension (case-insensitive); anything else is an error.
FileFormat format_from_path(const std::filesystem::path& path);

// Loading validates every record (see validate_records) and the whole-file
// invariants: single head, no duplicate mc_index per image. Errors carry the
// offending line (CSV) or record index (JSON).
RecordSet load_records(const std::filesystem::path& path, FileFormat format);
RecordSet load_records(const std::filesystem::path& path);
void write_records(const RecordSet& set, const std::filesystem::path& path, FileFormat format);
void write_records(const RecordSet& set, const std::filesystem::path& path);

// Per-record invariants: non-empty ids without separator characters,
// k >= 2 (binary exactly 2), arity match, probabilities in [0, 1],
// multiclass rows summing to 1 within 1e-6, finite values, mc_index >= -1.
void validate_record(const PredictionRecord& record);

// validate_record for each plus cross-record invariants (single head,
// unique mc_index per image, at most one deterministic row per image).
void validate_records(const RecordSet& set);

// Deterministic grouping: subjects, sessions and images appear in
// lexicographic id order; records within an image keep deterministic rows
// first, then ascending mc_index.
std::vector<SessionGroup> group_by_session(const RecordSet& set);

struct ImageKey {
  std::string subject_id;
  std::string session_id;
  std::string image_id;

  auto operator<=>(const ImageKey&) const = default;
};

using LabelMap = std::map<ImageKey, int>;

// Label files: header `subject_id,session_id,image_id,label`, one row per
// image, labels are integers (range checked against k at evaluation time).
LabelMap load_labels(const std::filesystem::path& path);
void write_labels(const LabelMap& labels, const std::filesystem::path& path);

}  // namespace repeatlab
