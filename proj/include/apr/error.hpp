/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace apr {

enum class ErrorCode {
  kEmptySurface,
  kDanglingId,
  kEmptyText,
  kUnknownText,
  kRemoteUnavailable,
  kDimensionMismatch,
  kInvalidParams,
  kInvalidArgument,
  kNoTriplesFound,
  kEmptyRun,
  kEmptyLines,
  kMalformedPrompt,
  kInvalidAliasMap,
  kNonFiniteLoss,
  kIo,
  kConfig,
  kWorkspace,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by remote adapters once retries are exhausted. `status` is the
/// last HTTP status seen, or 0 when no response arrived at all.
class RemoteError : public Error {
 public:
  RemoteError(int status, const std::string& what)
      : Error(ErrorCode::kRemoteUnavailable, what + " (http status " + std::to_string(status) + ")"),
        status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

class MalformedPrompt : public Error {
 public:
  MalformedPrompt(std::size_t offset, const std::string& what)
      : Error(ErrorCode::kMalformedPrompt, "at byte " + std::to_string(offset) + ": " + what),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace apr
