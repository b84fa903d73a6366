#pragma once

#include <stdexcept>
#include <string>

namespace fedvuln {

// Error categories map onto CLI exit codes: validation errors exit 1,
// I/O errors exit 2, everything else exits 3.
enum class ErrorKind {
  Dimension,
  Degenerate,
  Input,
  Schema,
  Record,
  Config,
  Partition,
  State,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Degenerate: return "degenerate input";
    case ErrorKind::Input: return "input error";
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Record: return "record error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Partition: return "partition error";
    case ErrorKind::State: return "state error";
    case ErrorKind::Io: return "I/O error";
  }
  return "error";
}

/// what() is "<kind>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind), detail_(detail) {}
  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

}  // namespace fedvuln
