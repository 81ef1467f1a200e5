#include "annotaudit/error.hpp"

namespace annotaudit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::BadEnum: return "BadEnum";
    case ErrorCode::DuplicateTriple: return "DuplicateTriple";
    case ErrorCode::EmptyAfterFilter: return "EmptyAfterFilter";
    case ErrorCode::MissingCell: return "MissingCell";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::NoVariation: return "NoVariation";
    case ErrorCode::DegenerateClusters: return "DegenerateClusters";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::AdaptationFailure: return "AdaptationFailure";
    case ErrorCode::AllDivergent: return "AllDivergent";
    case ErrorCode::HessianNotPD: return "HessianNotPD";
    case ErrorCode::UnknownLevel: return "UnknownLevel";
    case ErrorCode::ZeroWeightSubgroup: return "ZeroWeightSubgroup";
    case ErrorCode::TooFewCountries: return "TooFewCountries";
    case ErrorCode::CollinearDimensions: return "CollinearDimensions";
    case ErrorCode::UnknownDimension: return "UnknownDimension";
    case ErrorCode::DegenerateX: return "DegenerateX";
    case ErrorCode::IncompleteRanking: return "IncompleteRanking";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::NoEligibleUnits: return "NoEligibleUnits";
    case ErrorCode::MissingCountry: return "MissingCountry";
    case ErrorCode::InfeasibleConfig: return "InfeasibleConfig";
    case ErrorCode::UnknownSubcommand: return "UnknownSubcommand";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::Io: return "Io";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace annotaudit
