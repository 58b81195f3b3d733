#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvlens {

enum class ErrorCode {
  // data validation
  MalformedManifest,
  OffsetOutOfBounds,
  DuplicateId,
  NonFiniteVector,
  NotNormalized,
  DimMismatch,
  EmptyStore,
  NormalizationMismatch,
  MalformedRunFile,
  MalformedQrels,
  UnknownChunk,
  Io,
  // analysis preconditions
  EmptyCorpus,
  UnknownQuery,
  EmptyIntersection,
  TooFewItems,
  NoPositiveInRanking,
  TruncatedRun,
  UnbinnedChunk,
  NoPositive,
  NoNegativeBelowPositive,
  EmptyInput,
  NoQualifyingQueries,
  InvalidConfig,
};

/// Stable machine-readable name, e.g. "OffsetOutOfBounds".
std::string_view error_name(ErrorCode code) noexcept;

/// True for codes that describe malformed or inconsistent input data, as
/// opposed to an analysis whose preconditions are not met by valid data.
bool is_data_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mvlens
