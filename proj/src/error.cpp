#include <batauth/error.hpp>

namespace batauth {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::TooShortCycle: return "TooShortCycle";
    case ErrorCode::NonMonotoneCapacity: return "NonMonotoneCapacity";
    case ErrorCode::NonPositiveFrequency: return "NonPositiveFrequency";
    case ErrorCode::DuplicateFrequency: return "DuplicateFrequency";
    case ErrorCode::BadMeta: return "BadMeta";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::BadCsv: return "BadCsv";
    case ErrorCode::AllPointsDropped: return "AllPointsDropped";
    case ErrorCode::BadWindow: return "BadWindow";
    case ErrorCode::DegenerateVoltageRange: return "DegenerateVoltageRange";
    case ErrorCode::DegenerateFrequencyRange: return "DegenerateFrequencyRange";
    case ErrorCode::BadThreshold: return "BadThreshold";
    case ErrorCode::UnsupportedChannelCount: return "UnsupportedChannelCount";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::BadInterval: return "BadInterval";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::BadWidth: return "BadWidth";
    case ErrorCode::CatalogMismatch: return "CatalogMismatch";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::BadArgument: return "BadArgument";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::GridExhausted: return "GridExhausted";
    case ErrorCode::BadHyperparams: return "BadHyperparams";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::LabelAbsent: return "LabelAbsent";
    case ErrorCode::InfeasibleBalance: return "InfeasibleBalance";
    case ErrorCode::EmptyCounts: return "EmptyCounts";
    case ErrorCode::UnsupportedKind: return "UnsupportedKind";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace batauth
