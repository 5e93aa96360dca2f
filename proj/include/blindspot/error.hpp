#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace blindspot {

enum class ErrorKind {
  kMalformedLine,
  kInvariantViolation,
  kDuplicateDocId,
  kInvalidArgument,
  kDimensionMismatch,
  kUnsupportedPolicy,
  kEmptySelection,
  kTooFewDocs,
  kTokenizerMismatch,
  kMissingTopN,
  kNoAlignedDocs,
  kEmptyDoc,
  kMissingSurface,
  kMixedConditioning,
  kSingleClass,
  kClassTooSmall,
  kConstantInput,
  kTooFew,
  kRankDeficient,
  kUnderdetermined,
  kUnfittedModel,
  kNoPosTags,
  kTooFewTags,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// Every recoverable failure in the library is reported as an Error carrying
// a kind, so callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Parse failure tied to a 1-based line of an event log.
class LineError : public Error {
 public:
  LineError(ErrorKind kind, std::int64_t line_no, const std::string& message)
      : Error(kind, "line " + std::to_string(line_no) + ": " + message), line_no_(line_no) {}

  std::int64_t line_no() const noexcept { return line_no_; }

 private:
  std::int64_t line_no_;
};

}  // namespace blindspot
