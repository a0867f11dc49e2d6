/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "apr/retrieval.hpp"
#include "apr/types.hpp"

namespace apr {

/// Ordered as a lattice: IncludeAll above Unique above NotInclude.
enum class SelectorAction : std::uint8_t { kNotInclude = 0, kUnique = 1, kIncludeAll = 2 };

inline constexpr std::array<SelectorAction, 3> kActions = {SelectorAction::kNotInclude, SelectorAction::kUnique,
                                                           SelectorAction::kIncludeAll};

std::string_view to_string(SelectorAction a) noexcept;
std::optional<SelectorAction> parse_action(std::string_view s) noexcept;

struct SelectorConfig {
  std::array<SelectorAction, 3> actions{SelectorAction::kUnique, SelectorAction::kUnique, SelectorAction::kUnique};
  float cluster_threshold = 0.92f;

  SelectorAction action(Channel c) const { return actions[static_cast<std::size_t>(c)]; }
  void validate() const;
};

/// Parses "question=unique,answer=include_all,fact=unique" into `base`.
SelectorConfig parse_selection(std::string_view spec, SelectorConfig base = {});

struct RunCluster {
  std::vector<RunId> members;
  RunId representative;
};

/// Member vectors paired with their ids, in rank order.
struct RunVector {
  RunId id;
  Vector vector;
};

/// Single-link components of the graph with an edge where cosine >= theta.
/// Clusters are listed by their first member; members keep input order.
std::vector<RunCluster> cluster_runs(std::span<const RunVector> runs, float theta);

/// Member maximizing summed cosine to all members; ties go to the lowest id.
RunId consensus_representative(std::span<const RunVector> members);

struct Selection {
  std::array<std::vector<RankedRun>, 3> channels;
  std::size_t size() const noexcept;
};

/// Applies each channel's action to ranked results. `store` supplies centroids.
Selection apply_selection(std::span<const RankedRun> ranked, const RunStore& store, const SelectorConfig& config);

}  // namespace apr
