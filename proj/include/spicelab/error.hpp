#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spicelab {

enum class ErrorKind {
  // configuration / input shape
  DimensionMismatch,
  EmptyGrid,
  NonFiniteInput,
  IndexOutOfRange,
  NonPositiveVariance,
  InvalidConfig,
  Io,
  // numerical
  NotHermitian,
  NonFactorizable,
  ZeroMeasurement,
  ZeroWeight,
  ZeroRho,
  EmptySupport,
  AllZeroCoefficients,
  DegenerateDenominator,
  InconsistentSolution,
  NonFiniteResult,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// True for errors caused by bad configuration or malformed input rather than
/// a numerical breakdown. The CLI maps these to distinct exit codes.
bool is_config_error(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace spicelab
