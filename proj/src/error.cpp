// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include "cliqueparcel/error.hpp"

namespace cliqueparcel {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kParseError: return "ParseError";
    case Errc::kSchemaError: return "SchemaError";
    case Errc::kEmptyWorkload: return "EmptyWorkload";
    case Errc::kIoError: return "IoError";
    case Errc::kMissingConcept: return "MissingConcept";
    case Errc::kInvalidBatchSize: return "InvalidBatchSize";
    case Errc::kInstanceTooLarge: return "InstanceTooLarge";
    case Errc::kUnsupportedMethod: return "UnsupportedMethod";
    case Errc::kEmptyGroup: return "EmptyGroup";
    case Errc::kNoAnchorsFound: return "NoAnchorsFound";
    case Errc::kTransportError: return "TransportError";
    case Errc::kHttpStatus: return "HttpStatus";
    case Errc::kMalformedResponse: return "MalformedResponse";
    case Errc::kCacheMiss: return "CacheMiss";
    case Errc::kTimeout: return "Timeout";
    case Errc::kUnknownPrompt: return "UnknownPrompt";
    case Errc::kDispatchIncomplete: return "DispatchIncomplete";
    case Errc::kInvalidConfig: return "InvalidConfig";
    case Errc::kNoGroundTruth: return "NoGroundTruth";
    case Errc::kMissingAnswer: return "MissingAnswer";
    case Errc::kDivisionByZero: return "DivisionByZero";
    case Errc::kRankDeficient: return "RankDeficient";
    case Errc::kNondeterministicBackend: return "NondeterministicBackend";
  }
  return "Unknown";
}

}  // namespace cliqueparcel
