#include "logbel/error.hpp"

namespace logbel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidNetwork: return "InvalidNetwork";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kMissingRoot: return "MissingRoot";
    case ErrorCode::kMultipleRoots: return "MultipleRoots";
    case ErrorCode::kCycle: return "Cycle";
    case ErrorCode::kRowNotStochastic: return "RowNotStochastic";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kLeafWithoutEvidence: return "LeafWithoutEvidence";
    case ErrorCode::kNotALeaf: return "NotALeaf";
    case ErrorCode::kAllZeroLikelihood: return "AllZeroLikelihood";
    case ErrorCode::kUnknownNode: return "UnknownNode";
    case ErrorCode::kStateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorCode::kImpossibleEvidence: return "ImpossibleEvidence";
    case ErrorCode::kTreeTooSmall: return "TreeTooSmall";
    case ErrorCode::kNotRakeable: return "NotRakeable";
    case ErrorCode::kLevelOutOfRange: return "LevelOutOfRange";
    case ErrorCode::kNotAPolytree: return "NotAPolytree";
    case ErrorCode::kConstructionError: return "ConstructionError";
    case ErrorCode::kZeroMarginalDivisor: return "ZeroMarginalDivisor";
    case ErrorCode::kDimensionOverflow: return "DimensionOverflow";
    case ErrorCode::kUnknownVariable: return "UnknownVariable";
  }
  return "Unknown";
}

}  // namespace logbel
