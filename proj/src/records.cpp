#include "repeatlab/records.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "repeatlab/errors.hpp"
#include "repeatlab/jsonio.hpp"

namespace repeatlab {

namespace {

constexpr double kProbSumTolerance = 1e-6;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (c != '\r') {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

int parse_int(const std::string& text, const std::string& what) {
  int value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw_schema(what + ": expected an integer, got '" + text + "'");
  }
  return value;
}

double parse_double(const std::string& text, const std::string& what) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw_schema(what + ": expected a number, got '" + text + "'");
  }
  return value;
}

void check_id(const std::string& id, const std::string& what) {
  if (id.empty()) throw_schema(what + " must be non-empty");
  if (id.find_first_of(",\"\n\r") != std::string::npos) {
    throw_schema(what + " '" + id + "' contains a separator character");
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw_io("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string image_label(const PredictionRecord& r) {
  return r.subject_id + "/" + r.session_id + "/" + r.image_id;
}

// Prefixes schema errors with file/position context, preserving the code.
template <class Fn>
void with_context(const std::string& context, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    throw Error(e.code(), context + ": " + e.what());
  }
}

}  // namespace

int HeadKind::output_arity() const {
  switch (type) {
    case HeadType::binary: return 1;
    case HeadType::multiclass: return num_classes;
    case HeadType::ordinal: return num_classes - 1;
    case HeadType::regression: return 1;
  }
  throw_args("invalid head type");
}

double HeadKind::range_high() const {
  return type == HeadType::binary ? 1.0 : static_cast<double>(num_classes - 1);
}

std::string HeadKind::name() const {
  switch (type) {
    case HeadType::binary: return "binary";
    case HeadType::multiclass: return "multiclass";
    case HeadType::ordinal: return "ordinal";
    case HeadType::regression: return "regression";
  }
  throw_args("invalid head type");
}

HeadType HeadKind::parse_type(const std::string& name) {
  if (name == "binary") return HeadType::binary;
  if (name == "multiclass") return HeadType::multiclass;
  if (name == "ordinal") return HeadType::ordinal;
  if (name == "regression") return HeadType::regression;
  throw_schema("unknown head type '" + name + "'");
}

std::optional<HeadKind> RecordSet::head() const {
  if (records.empty()) return std::nullopt;
  return records.front().head;
}

bool RecordSet::has_deterministic() const {
  return std::any_of(records.begin(), records.end(),
                     [](const PredictionRecord& r) { return r.deterministic(); });
}

bool RecordSet::has_mc() const {
  return std::any_of(records.begin(), records.end(),
                     [](const PredictionRecord& r) { return !r.deterministic(); });
}

FileFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".csv") return FileFormat::csv;
  if (ext == ".json") return FileFormat::json;
  throw_args("cannot infer file format from '" + path.string() +
             "' (expected a .csv or .json extension)");
}

void validate_record(const PredictionRecord& r) {
  check_id(r.subject_id, "subject_id");
  check_id(r.session_id, "session_id");
  check_id(r.image_id, "image_id");
  if (r.head.num_classes < 2) throw_schema("k must be at least 2");
  if (r.head.type == HeadType::binary && r.head.num_classes != 2) {
    throw_schema("binary head requires k = 2");
  }
  if (r.mc_index < kDeterministic) {
    throw_schema("mc_index must be >= 0, or -1 for a deterministic pass");
  }
  const int arity = r.head.output_arity();
  if (static_cast<int>(r.outputs.size()) != arity) {
    throw_schema(r.head.name() + " record with k = " + std::to_string(r.head.num_classes) +
                 " requires " + std::to_string(arity) + " outputs, got " +
                 std::to_string(r.outputs.size()));
  }
  for (double v : r.outputs) {
    if (!std::isfinite(v)) throw_schema("outputs must be finite");
  }
  if (r.head.type == HeadType::binary || r.head.type == HeadType::ordinal ||
      r.head.type == HeadType::multiclass) {
    for (double v : r.outputs) {
      if (v < 0.0 || v > 1.0) {
        throw_schema("probability output " + format_roundtrip(v) + " outside [0, 1]");
      }
    }
  }
  if (r.head.type == HeadType::multiclass) {
    double sum = 0.0;
    for (double v : r.outputs) sum += v;
    if (std::abs(sum - 1.0) > kProbSumTolerance) {
      throw_schema("multiclass outputs sum to " + format_roundtrip(sum) +
                   ", expected 1 within 1e-06");
    }
  }
}

void validate_records(const RecordSet& set) {
  std::optional<HeadKind> head;
  std::map<ImageKey, std::set<int>> seen;
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    const PredictionRecord& r = set.records[i];
    with_context("record " + std::to_string(i + 1), [&] { validate_record(r); });
    if (!head) {
      head = r.head;
    } else if (r.head != *head) {
      throw_schema("record " + std::to_string(i + 1) + ": head " + r.head.name() + "/k=" +
                   std::to_string(r.head.num_classes) + " differs from the file head " +
                   head->name() + "/k=" + std::to_string(head->num_classes));
    }
    auto [it, inserted] = seen[{r.subject_id, r.session_id, r.image_id}].insert(r.mc_index);
    if (!inserted) {
      throw_schema("image " + image_label(r) + ": duplicate mc_index " +
                   std::to_string(r.mc_index));
    }
  }
}

namespace {

RecordSet load_records_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  const std::string file = "'" + path.string() + "'";
  std::string line;
  if (!std::getline(in, line)) throw_schema(file + ": missing header row");
  const std::vector<std::string> header = split_csv(line);
  const std::vector<std::string> fixed = {"subject_id", "session_id", "image_id",
                                          "head", "k", "mc_index"};
  if (header.size() < fixed.size() + 1) {
    throw_schema(file + ": header must be subject_id,session_id,image_id,head,k,mc_index,out_0,...");
  }
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (header[i] != fixed[i]) {
      throw_schema(file + ": header column " + std::to_string(i + 1) + " must be '" +
                   fixed[i] + "', got '" + header[i] + "'");
    }
  }
  const std::size_t n_out_cols = header.size() - fixed.size();
  for (std::size_t i = 0; i < n_out_cols; ++i) {
    const std::string expected = "out_" + std::to_string(i);
    if (header[fixed.size() + i] != expected) {
      throw_schema(file + ": header column " + std::to_string(fixed.size() + i + 1) +
                   " must be '" + expected + "', got '" + header[fixed.size() + i] + "'");
    }
  }

  RecordSet set;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string context = file + " line " + std::to_string(line_no);
    with_context(context, [&] {
      const std::vector<std::string> fields = split_csv(line);
      if (fields.size() != header.size()) {
        throw_schema("expected " + std::to_string(header.size()) + " fields, got " +
                     std::to_string(fields.size()));
      }
      PredictionRecord r;
      r.subject_id = fields[0];
      r.session_id = fields[1];
      r.image_id = fields[2];
      r.head.type = HeadKind::parse_type(fields[3]);
      r.head.num_classes = parse_int(fields[4], "k");
      r.mc_index = parse_int(fields[5], "mc_index");
      if (r.head.num_classes < 2) throw_schema("k must be at least 2");
      const int arity = r.head.output_arity();
      if (static_cast<int>(n_out_cols) < arity) {
        throw_schema("head needs " + std::to_string(arity) + " output columns but the file has " +
                     std::to_string(n_out_cols));
      }
      for (int i = 0; i < arity; ++i) {
        r.outputs.push_back(parse_double(fields[6 + i], "out_" + std::to_string(i)));
      }
      for (std::size_t i = 6 + arity; i < fields.size(); ++i) {
        if (!fields[i].empty()) {
          throw_schema("column '" + header[i] + "' must be empty for this head, got '" +
                       fields[i] + "'");
        }
      }
      validate_record(r);
      set.records.push_back(std::move(r));
    });
  }
  return set;
}

RecordSet load_records_json(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  const std::string file = "'" + path.string() + "'";
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw_schema(file + ": invalid JSON: " + e.what());
  }
  if (!doc.is_array()) throw_schema(file + ": top-level value must be an array of records");
  RecordSet set;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string context = file + " record " + std::to_string(i + 1);
    with_context(context, [&] {
      const nlohmann::json& item = doc[i];
      if (!item.is_object()) throw_schema("expected an object");
      try {
        PredictionRecord r;
        r.subject_id = item.at("subject_id").get<std::string>();
        r.session_id = item.at("session_id").get<std::string>();
        r.image_id = item.at("image_id").get<std::string>();
        r.head.type = HeadKind::parse_type(item.at("head").get<std::string>());
        r.head.num_classes = item.at("k").get<int>();
        r.mc_index = item.at("mc_index").get<int>();
        r.outputs = item.at("outputs").get<std::vector<double>>();
        validate_record(r);
        set.records.push_back(std::move(r));
      } catch (const nlohmann::json::exception& e) {
        throw_schema(std::string("malformed record: ") + e.what());
      }
    });
  }
  return set;
}

}  // namespace

RecordSet load_records(const std::filesystem::path& path, FileFormat format) {
  RecordSet set = format == FileFormat::csv ? load_records_csv(path) : load_records_json(path);
  validate_records(set);
  return set;
}

RecordSet load_records(const std::filesystem::path& path) {
  return load_records(path, format_from_path(path));
}

void write_records(const RecordSet& set, const std::filesystem::path& path, FileFormat format) {
  validate_records(set);
  const int arity = set.empty() ? 1 : set.head()->output_arity();
  if (format == FileFormat::csv) {
    std::ofstream out = open_output(path);
    out << "subject_id,session_id,image_id,head,k,mc_index";
    for (int i = 0; i < arity; ++i) out << ",out_" << i;
    out << "\n";
    for (const PredictionRecord& r : set.records) {
      out << r.subject_id << ',' << r.session_id << ',' << r.image_id << ','
          << r.head.name() << ',' << r.head.num_classes << ',' << r.mc_index;
      for (double v : r.outputs) out << ',' << format_roundtrip(v);
      out << "\n";
    }
    if (!out) throw_io("failed writing '" + path.string() + "'");
    return;
  }
  JsonWriter w;
  w.begin_array();
  for (const PredictionRecord& r : set.records) {
    w.begin_object();
    w.key("subject_id").value(r.subject_id);
    w.key("session_id").value(r.session_id);
    w.key("image_id").value(r.image_id);
    w.key("head").value(r.head.name());
    w.key("k").value(r.head.num_classes);
    w.key("mc_index").value(r.mc_index);
    w.key("outputs").begin_array(true);
    for (double v : r.outputs) w.raw_number(format_roundtrip(v));
    w.end_array();
    w.end_object();
  }
  w.end_array();
  std::ofstream out = open_output(path);
  out << w.str();
  if (!out) throw_io("failed writing '" + path.string() + "'");
}

void write_records(const RecordSet& set, const std::filesystem::path& path) {
  write_records(set, path, format_from_path(path));
}

std::vector<SessionGroup> group_by_session(const RecordSet& set) {
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<PredictionRecord>>>
      grouped;
  for (const PredictionRecord& r : set.records) {
    grouped[{r.subject_id, r.session_id}][r.image_id].push_back(r);
  }
  std::vector<SessionGroup> groups;
  groups.reserve(grouped.size());
  for (auto& [key, images] : grouped) {
    SessionGroup group;
    group.subject_id = key.first;
    group.session_id = key.second;
    for (auto& [image_id, records] : images) {
      std::stable_sort(records.begin(), records.end(),
                       [](const PredictionRecord& a, const PredictionRecord& b) {
                         return a.mc_index < b.mc_index;
                       });
      group.images.push_back(ImageRecords{image_id, std::move(records)});
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

LabelMap load_labels(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  const std::string file = "'" + path.string() + "'";
  std::string line;
  if (!std::getline(in, line)) throw_schema(file + ": missing header row");
  const std::vector<std::string> header = split_csv(line);
  const std::vector<std::string> expected = {"subject_id", "session_id", "image_id", "label"};
  if (header != expected) {
    throw_schema(file + ": header must be subject_id,session_id,image_id,label");
  }
  LabelMap labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string context = file + " line " + std::to_string(line_no);
    with_context(context, [&] {
      const std::vector<std::string> fields = split_csv(line);
      if (fields.size() != 4) {
        throw_schema("expected 4 fields, got " + std::to_string(fields.size()));
      }
      check_id(fields[0], "subject_id");
      check_id(fields[1], "session_id");
      check_id(fields[2], "image_id");
      const int label = parse_int(fields[3], "label");
      if (label < 0) throw_schema("label must be non-negative");
      ImageKey key{fields[0], fields[1], fields[2]};
      if (!labels.emplace(std::move(key), label).second) {
        throw_schema("duplicate label for image " + fields[0] + "/" + fields[1] + "/" + fields[2]);
      }
    });
  }
  return labels;
}

void write_labels(const LabelMap& labels, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "subject_id,session_id,image_id,label\n";
  for (const auto& [key, label] : labels) {
    check_id(key.subject_id, "subject_id");
    check_id(key.session_id, "session_id");
    check_id(key.image_id, "image_id");
    out << key.subject_id << ',' << key.session_id << ',' << key.image_id << ',' << label << "\n";
  }
  if (!out) throw_io("failed writing '" + path.string() + "'");
}

}  // namespace repeatlab
