#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qecho {

// Error classes map one-to-one onto CLI exit codes (see tools/qecho.cpp).
enum class ErrorKind {
  InvalidParameter,
  UnsupportedSymmetry,
  IncompleteBasis,
  Convergence,
  QuadratureNonconvergence,
  AmbiguousTracking,
  InsufficientBoundStates,
  GridLeakage,
  StepSize,
  NoMinimum,
  Truncation,
  CorruptEntry,
  VersionMismatch,
  IoFailure,
  Config,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidParameter, what);
}

}  // namespace qecho
