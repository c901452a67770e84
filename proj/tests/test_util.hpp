#pragma once

// Shared helpers for the test binaries: scratch directories, file slurping,
// and Error-code capture.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

#include "repeatlab/errors.hpp"

namespace testutil {

// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    root_ = std::filesystem::temp_directory_path() /
            ("repeatlab_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(root_);
    std::filesystem::create_directories(root_);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(root_, ec);
  }

  const std::filesystem::path& path() const { return root_; }
  std::filesystem::path file(const std::string& name) const { return root_ / name; }

 private:
  std::filesystem::path root_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// Runs `fn`; returns the Error code it throws, or "" if it does not throw.
template <class Fn>
std::string error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const repeatlab::Error& e) {
    return e.code();
  }
  return "";
}

// Runs `fn`; returns the Error message it throws, or "" if it does not throw.
template <class Fn>
std::string error_message_of(Fn&& fn) {
  try {
    fn();
  } catch (const repeatlab::Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace testutil
