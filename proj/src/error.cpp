#include "blindspot/error.hpp"

namespace blindspot {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMalformedLine: return "MalformedLine";
    case ErrorKind::kInvariantViolation: return "InvariantViolation";
    case ErrorKind::kDuplicateDocId: return "DuplicateDocId";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kUnsupportedPolicy: return "UnsupportedPolicy";
    case ErrorKind::kEmptySelection: return "EmptySelection";
    case ErrorKind::kTooFewDocs: return "TooFewDocs";
    case ErrorKind::kTokenizerMismatch: return "TokenizerMismatch";
    case ErrorKind::kMissingTopN: return "MissingTopN";
    case ErrorKind::kNoAlignedDocs: return "NoAlignedDocs";
    case ErrorKind::kEmptyDoc: return "EmptyDoc";
    case ErrorKind::kMissingSurface: return "MissingSurface";
    case ErrorKind::kMixedConditioning: return "MixedConditioning";
    case ErrorKind::kSingleClass: return "SingleClass";
    case ErrorKind::kClassTooSmall: return "ClassTooSmall";
    case ErrorKind::kConstantInput: return "ConstantInput";
    case ErrorKind::kTooFew: return "TooFew";
    case ErrorKind::kRankDeficient: return "RankDeficient";
    case ErrorKind::kUnderdetermined: return "Underdetermined";
    case ErrorKind::kUnfittedModel: return "UnfittedModel";
    case ErrorKind::kNoPosTags: return "NoPosTags";
    case ErrorKind::kTooFewTags: return "TooFewTags";
    case ErrorKind::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace blindspot
