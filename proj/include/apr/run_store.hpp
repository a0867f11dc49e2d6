/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "apr/segmenter.hpp"

namespace apr {

/// Per-channel run repositories with workspace-unique run ids.
class RunStore {
 public:
  /// Renumbers `runs` with fresh ids and appends them to their channel.
  /// Returns the ids given out.
  std::vector<RunId> append(std::vector<Run> runs);

  /// Inserts runs keeping their ids (used when restoring).
  void restore(std::vector<Run> runs);

  const std::vector<Run>& channel(Channel c) const { return runs_[static_cast<std::size_t>(c)]; }
  std::vector<Run>& channel_mut(Channel c) { return runs_[static_cast<std::size_t>(c)]; }
  const Run* find(RunId id) const;

  std::size_t size() const noexcept;
  std::size_t longest() const noexcept;
  RunId next_id() const noexcept { return RunId(next_id_); }

 private:
  std::array<std::vector<Run>, 3> runs_;
  std::uint32_t next_id_ = 0;
};

}  // namespace apr
