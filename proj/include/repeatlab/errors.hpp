#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace repeatlab {

// All library failures surface as Error. `code` is a short stable token the
// CLI prints in its one-line diagnostics:
//   io         - file cannot be opened / read / written
//   schema     - input file violates the documented record/label schema
//   args       - a precondition on arguments was violated
//   degenerate - a statistic is undefined for this data (zero range, ...)
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void throw_io(const std::string& msg) { throw Error("io", msg); }
[[noreturn]] inline void throw_schema(const std::string& msg) { throw Error("schema", msg); }
[[noreturn]] inline void throw_args(const std::string& msg) { throw Error("args", msg); }
[[noreturn]] inline void throw_degenerate(const std::string& msg) { throw Error("degenerate", msg); }

}  // namespace repeatlab
