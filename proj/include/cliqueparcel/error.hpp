// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cliqueparcel {

enum class Errc {
  kDimensionMismatch,
  kParseError,
  kSchemaError,
  kEmptyWorkload,
  kIoError,
  kMissingConcept,
  kInvalidBatchSize,
  kInstanceTooLarge,
  kUnsupportedMethod,
  kEmptyGroup,
  kNoAnchorsFound,
  kTransportError,
  kHttpStatus,
  kMalformedResponse,
  kCacheMiss,
  kTimeout,
  kUnknownPrompt,
  kDispatchIncomplete,
  kInvalidConfig,
  kNoGroundTruth,
  kMissingAnswer,
  kDivisionByZero,
  kRankDeficient,
  kNondeterministicBackend,
};

std::string_view errc_name(Errc code);

// Single exception type for the library. `detail` carries the payload the
// error kind names (line number, HTTP status, prompt id, ...).
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message, long detail = 0)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  long detail() const noexcept { return detail_; }

  // Retriable transport failures (429, 5xx, timeouts).
  bool retriable() const noexcept {
    return code_ == Errc::kTimeout || code_ == Errc::kTransportError ||
           (code_ == Errc::kHttpStatus && (detail_ == 429 || detail_ >= 500));
  }

 private:
  Errc code_;
  long detail_;
};

}  // namespace cliqueparcel
