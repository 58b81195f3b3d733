#include "mvlens/error.hpp"

namespace mvlens {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::OffsetOutOfBounds: return "OffsetOutOfBounds";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::NonFiniteVector: return "NonFiniteVector";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyStore: return "EmptyStore";
    case ErrorCode::NormalizationMismatch: return "NormalizationMismatch";
    case ErrorCode::MalformedRunFile: return "MalformedRunFile";
    case ErrorCode::MalformedQrels: return "MalformedQrels";
    case ErrorCode::UnknownChunk: return "UnknownChunk";
    case ErrorCode::Io: return "Io";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::UnknownQuery: return "UnknownQuery";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::TooFewItems: return "TooFewItems";
    case ErrorCode::NoPositiveInRanking: return "NoPositiveInRanking";
    case ErrorCode::TruncatedRun: return "TruncatedRun";
    case ErrorCode::UnbinnedChunk: return "UnbinnedChunk";
    case ErrorCode::NoPositive: return "NoPositive";
    case ErrorCode::NoNegativeBelowPositive: return "NoNegativeBelowPositive";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoQualifyingQueries: return "NoQualifyingQueries";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

bool is_data_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedManifest:
    case ErrorCode::OffsetOutOfBounds:
    case ErrorCode::DuplicateId:
    case ErrorCode::NonFiniteVector:
    case ErrorCode::NotNormalized:
    case ErrorCode::DimMismatch:
    case ErrorCode::EmptyStore:
    case ErrorCode::NormalizationMismatch:
    case ErrorCode::MalformedRunFile:
    case ErrorCode::MalformedQrels:
    case ErrorCode::UnknownChunk:
    case ErrorCode::Io:
      return true;
    default:
      return false;
  }
}

}  // namespace mvlens
