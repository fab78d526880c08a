#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hit {

enum class ErrorKind {
  InvalidDimension,
  InvalidValue,
  NumericInstability,
  DegenerateGradient,
  CyclicHierarchy,
  Lookup,
  InsufficientNegatives,
  Split,
  Parse,
  Config,
  Coverage,
  DimensionMismatch,
  LengthMismatch,
  EmptyGrid,
  UndefinedCorrelation,
  Provenance,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidDimension: return "invalid-dimension";
    case ErrorKind::InvalidValue: return "invalid-value";
    case ErrorKind::NumericInstability: return "numeric-instability";
    case ErrorKind::DegenerateGradient: return "degenerate-gradient";
    case ErrorKind::CyclicHierarchy: return "cyclic-hierarchy";
    case ErrorKind::Lookup: return "lookup";
    case ErrorKind::InsufficientNegatives: return "insufficient-negatives";
    case ErrorKind::Split: return "split";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Config: return "config";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::LengthMismatch: return "length-mismatch";
    case ErrorKind::EmptyGrid: return "empty-grid";
    case ErrorKind::UndefinedCorrelation: return "undefined-correlation";
    case ErrorKind::Provenance: return "provenance";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library. `module()` names the component that
/// raised it so CLI diagnostics can point at the failing stage.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string_view module, const std::string& what)
      : std::runtime_error(std::string(module) + ": " + std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        module_(module) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string_view module_;
};

}  // namespace hit
