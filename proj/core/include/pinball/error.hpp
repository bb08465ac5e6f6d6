#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pinball {

enum class ErrorKind {
  InvalidConfiguration,
  Precondition,
  Overflow,
  SolverFailure,
  Grazing,
  Occlusion,
  Consistency,
  OracleFailure,
  Coverage,
  InsufficientData,
  Domain,
  Undefined,
  Parse,
  Integrity,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::Precondition, what);
}

}  // namespace pinball
