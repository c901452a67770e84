#include "repeatlab/jsonio.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "repeatlab/errors.hpp"

namespace repeatlab {

std::string format_g9(double value) {
  if (!std::isfinite(value)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  std::string text(buf);
  // %g may omit the decimal point for integral values; that is still valid
  // JSON and intentional (stable, minimal output).
  return text;
}

std::string format_roundtrip(double value) {
  if (!std::isfinite(value)) return "null";
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw_args("format_roundtrip: conversion failed");
  return std::string(buf, ptr);
}

std::string json_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size() + 2);
  for (unsigned char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

void JsonWriter::raw(std::string_view text) { out_.append(text); }

void JsonWriter::newline_indent() {
  out_ += '\n';
  out_.append(2 * stack_.size(), ' ');
}

void JsonWriter::before_item() {
  if (pending_key_) {
    pending_key_ = false;
    return;
  }
  if (stack_.empty()) return;
  Frame& frame = stack_.back();
  if (!frame.is_array) throw_args("json writer: object member requires a key");
  if (frame.has_items) out_ += frame.inline_values ? ", " : ",";
  if (!frame.inline_values) newline_indent();
  frame.has_items = true;
}

JsonWriter& JsonWriter::begin_object() {
  before_item();
  raw("{");
  stack_.push_back(Frame{false, false, false});
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  if (stack_.empty() || stack_.back().is_array) throw_args("json writer: mismatched end_object");
  const bool had_items = stack_.back().has_items;
  stack_.pop_back();
  if (had_items) newline_indent();
  raw("}");
  return *this;
}

JsonWriter& JsonWriter::begin_array(bool inline_values) {
  before_item();
  raw("[");
  stack_.push_back(Frame{true, inline_values, false});
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  if (stack_.empty() || !stack_.back().is_array) throw_args("json writer: mismatched end_array");
  const Frame frame = stack_.back();
  stack_.pop_back();
  if (frame.has_items && !frame.inline_values) newline_indent();
  raw("]");
  return *this;
}

JsonWriter& JsonWriter::key(std::string_view name) {
  if (stack_.empty() || stack_.back().is_array) throw_args("json writer: key outside object");
  Frame& frame = stack_.back();
  if (frame.has_items) out_ += ",";
  newline_indent();
  frame.has_items = true;
  raw("\"");
  raw(json_escape(name));
  raw("\": ");
  pending_key_ = true;
  return *this;
}

JsonWriter& JsonWriter::value(double v) {
  before_item();
  raw(format_g9(v));
  return *this;
}

JsonWriter& JsonWriter::value(int v) { return value(static_cast<std::int64_t>(v)); }

JsonWriter& JsonWriter::value(std::int64_t v) {
  before_item();
  raw(std::to_string(v));
  return *this;
}

JsonWriter& JsonWriter::value(std::uint64_t v) {
  before_item();
  raw(std::to_string(v));
  return *this;
}

JsonWriter& JsonWriter::value(bool v) {
  before_item();
  raw(v ? "true" : "false");
  return *this;
}

JsonWriter& JsonWriter::value(std::string_view v) {
  before_item();
  raw("\"");
  raw(json_escape(v));
  raw("\"");
  return *this;
}

JsonWriter& JsonWriter::null() {
  before_item();
  raw("null");
  return *this;
}

JsonWriter& JsonWriter::raw_number(std::string_view formatted) {
  before_item();
  raw(formatted);
  return *this;
}

std::string JsonWriter::str() const {
  if (!stack_.empty()) throw_args("json writer: unclosed containers");
  return out_ + "\n";
}

}  // namespace repeatlab
