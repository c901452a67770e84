#pragma once

// Deterministic JSON emission. Reports must be byte-stable across platforms
// and runs, so floats are printed with exactly 9 significant digits and keys
// appear in the order the caller writes them. Parsing (CLI inputs, compare)
// uses nlohmann::json; only emission goes through this writer.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace repeatlab {

// %.9g rendering; NaN and infinities render as "null" (JSON has no NaN).
std::string format_g9(double value);

// Shortest round-trip rendering (std::to_chars); used where re-reading the
// number must reproduce the exact bit pattern (record/label files).
std::string format_roundtrip(double value);

// JSON string escaping, including control characters.
std::string json_escape(std::string_view text);

class JsonWriter {
 public:
  // Objects pretty-print with two-space indentation. Arrays opened with
  // `inline_values = true` render on a single line (used for long numeric
  // vectors such as bootstrap samples).
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array(bool inline_values = false);
  JsonWriter& end_array();
  JsonWriter& key(std::string_view name);
  JsonWriter& value(double v);
  JsonWriter& value(int v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& null();
  // Emits an already-formatted numeric token (e.g. round-trip floats).
  JsonWriter& raw_number(std::string_view formatted);

  // Finishes the document (trailing newline included).
  std::string str() const;

 private:
  struct Frame {
    bool is_array = false;
    bool inline_values = false;
    bool has_items = false;
  };

  void before_item();
  void raw(std::string_view text);
  void newline_indent();

  std::string out_;
  std::vector<Frame> stack_;
  bool pending_key_ = false;
};

}  // namespace repeatlab
