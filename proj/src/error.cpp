#include "spmat/error.hpp"

namespace spmat {

std::string_view to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::MissingTag: return "MissingTag";
  case ErrorCode::UnknownElement: return "UnknownElement";
  case ErrorCode::NonP1Symmetry: return "NonP1Symmetry";
  case ErrorCode::MalformedNumber: return "MalformedNumber";
  case ErrorCode::InvalidStructure: return "InvalidStructure";
  case ErrorCode::DuplicateId: return "DuplicateId";
  case ErrorCode::NonContiguousLabels: return "NonContiguousLabels";
  case ErrorCode::MissingColumn: return "MissingColumn";
  case ErrorCode::PlacementFailure: return "PlacementFailure";
  case ErrorCode::IsolatedAtom: return "IsolatedAtom";
  case ErrorCode::MissingTableEntry: return "MissingTableEntry";
  case ErrorCode::ShapeMismatch: return "ShapeMismatch";
  case ErrorCode::NonFinite: return "NonFinite";
  case ErrorCode::NotScalar: return "NotScalar";
  case ErrorCode::DetachedLoss: return "DetachedLoss";
  case ErrorCode::EmptySegment: return "EmptySegment";
  case ErrorCode::ZeroNormRow: return "ZeroNormRow";
  case ErrorCode::EmptyPositiveSet: return "EmptyPositiveSet";
  case ErrorCode::DegenerateFeature: return "DegenerateFeature";
  case ErrorCode::MissingSurrogateLabel: return "MissingSurrogateLabel";
  case ErrorCode::MissingTarget: return "MissingTarget";
  case ErrorCode::EmptySplit: return "EmptySplit";
  case ErrorCode::BadMagic: return "BadMagic";
  case ErrorCode::VersionMismatch: return "VersionMismatch";
  case ErrorCode::TruncatedPayload: return "TruncatedPayload";
  case ErrorCode::InvalidConfig: return "InvalidConfig";
  case ErrorCode::UnknownKey: return "UnknownKey";
  case ErrorCode::UnknownId: return "UnknownId";
  case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

ErrorCategory category(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidConfig:
  case ErrorCode::UnknownKey:
    return ErrorCategory::Config;
  case ErrorCode::NonFinite:
    return ErrorCategory::Numerical;
  default:
    return ErrorCategory::Data;
  }
}

Error::Error(ErrorCode code, const std::string &what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what),
      code_(code) {}

} // namespace spmat
