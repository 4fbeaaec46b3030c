#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spmat {

enum class ErrorCode {
  // structure-io
  MissingTag,
  UnknownElement,
  NonP1Symmetry,
  MalformedNumber,
  InvalidStructure,
  DuplicateId,
  NonContiguousLabels,
  MissingColumn,
  PlacementFailure,
  // graph
  IsolatedAtom,
  MissingTableEntry,
  // autodiff
  ShapeMismatch,
  NonFinite,
  NotScalar,
  DetachedLoss,
  // model / losses
  EmptySegment,
  ZeroNormRow,
  EmptyPositiveSet,
  DegenerateFeature,
  // train
  MissingSurrogateLabel,
  MissingTarget,
  EmptySplit,
  BadMagic,
  VersionMismatch,
  TruncatedPayload,
  // cli / io
  InvalidConfig,
  UnknownKey,
  UnknownId,
  Io,
};

/// Coarse grouping used by the command-line tool to pick an exit code.
enum class ErrorCategory { Config, Data, Numerical };

std::string_view to_string(ErrorCode code);
ErrorCategory category(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what);

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace spmat
