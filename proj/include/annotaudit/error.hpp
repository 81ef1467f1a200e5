#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace annotaudit {

enum class ErrorCode {
  // dataset
  MissingColumn,
  BadEnum,
  DuplicateTriple,
  EmptyAfterFilter,
  MissingCell,
  // glm
  Separation,
  Singular,
  NoVariation,
  DegenerateClusters,
  ZeroVariance,
  // bayes
  NonFinite,
  AdaptationFailure,
  AllDivergent,
  HessianNotPD,
  // mrp
  UnknownLevel,
  ZeroWeightSubgroup,
  TooFewCountries,
  // culture
  CollinearDimensions,
  UnknownDimension,
  DegenerateX,
  IncompleteRanking,
  // matching
  SingularCovariance,
  NoEligibleUnits,
  // evaluate
  MissingCountry,
  // synth
  InfeasibleConfig,
  // cli and plumbing
  UnknownSubcommand,
  ConfigError,
  Io,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the toolkit carries one of the codes above so that
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace annotaudit
