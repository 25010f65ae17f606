#include "qecho/format.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "qecho/error.hpp"

namespace qecho {

std::string format_exact(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) fail(ErrorKind::InvalidParameter, "cannot format number");
  return std::string(buf, res.ptr);
}

std::string format_sig(double v, int digits) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, digits);
  if (res.ec != std::errc()) fail(ErrorKind::InvalidParameter, "cannot format number");
  return std::string(buf, res.ptr);
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::UnsupportedSymmetry: return "unsupported-symmetry";
    case ErrorKind::IncompleteBasis: return "incomplete-basis";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::QuadratureNonconvergence: return "quadrature-nonconvergence";
    case ErrorKind::AmbiguousTracking: return "ambiguous-tracking";
    case ErrorKind::InsufficientBoundStates: return "insufficient-bound-states";
    case ErrorKind::GridLeakage: return "grid-leakage";
    case ErrorKind::StepSize: return "step-size";
    case ErrorKind::NoMinimum: return "no-minimum";
    case ErrorKind::Truncation: return "truncation";
    case ErrorKind::CorruptEntry: return "corrupt-entry";
    case ErrorKind::VersionMismatch: return "version-mismatch";
    case ErrorKind::IoFailure: return "io-failure";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

}  // namespace qecho
