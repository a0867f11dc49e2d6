/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/error.hpp"
#include "apr/types.hpp"

namespace apr {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kEmptySurface: return "EmptySurface";
    case ErrorCode::kDanglingId: return "DanglingId";
    case ErrorCode::kEmptyText: return "EmptyText";
    case ErrorCode::kUnknownText: return "UnknownText";
    case ErrorCode::kRemoteUnavailable: return "RemoteUnavailable";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNoTriplesFound: return "NoTriplesFound";
    case ErrorCode::kEmptyRun: return "EmptyRun";
    case ErrorCode::kEmptyLines: return "EmptyLines";
    case ErrorCode::kMalformedPrompt: return "MalformedPrompt";
    case ErrorCode::kInvalidAliasMap: return "InvalidAliasMap";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kWorkspace: return "WorkspaceError";
  }
  return "Unknown";
}

std::string_view to_string(Channel c) noexcept {
  switch (c) {
    case Channel::kQuestion: return "question";
    case Channel::kAnswer: return "answer";
    case Channel::kFact: return "fact";
  }
  return "fact";
}

std::optional<Channel> parse_channel(std::string_view s) noexcept {
  if (s == "question" || s == "q") return Channel::kQuestion;
  if (s == "answer" || s == "a" || s == "knowledge") return Channel::kAnswer;
  if (s == "fact" || s == "f") return Channel::kFact;
  return std::nullopt;
}

}  // namespace apr
