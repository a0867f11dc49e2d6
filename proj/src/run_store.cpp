/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/run_store.hpp"

#include <algorithm>

namespace apr {

std::vector<RunId> RunStore::append(std::vector<Run> runs) {
  std::vector<RunId> ids;
  ids.reserve(runs.size());
  for (auto& run : runs) {
    if (run.edges.empty()) throw Error(ErrorCode::kEmptyRun, "cannot store an empty run");
    run.id = RunId(next_id_++);
    ids.push_back(run.id);
    channel_mut(run.channel).push_back(std::move(run));
  }
  return ids;
}

void RunStore::restore(std::vector<Run> runs) {
  for (auto& run : runs) {
    if (run.edges.empty()) throw Error(ErrorCode::kEmptyRun, "cannot store an empty run");
    next_id_ = std::max(next_id_, run.id.value + 1);
    channel_mut(run.channel).push_back(std::move(run));
  }
  for (auto& list : runs_) {
    std::sort(list.begin(), list.end(), [](const Run& a, const Run& b) { return a.id < b.id; });
  }
}

const Run* RunStore::find(RunId id) const {
  for (const auto& list : runs_) {
    auto it = std::lower_bound(list.begin(), list.end(), id, [](const Run& r, RunId v) { return r.id < v; });
    if (it != list.end() && it->id == id) return &*it;
  }
  return nullptr;
}

std::size_t RunStore::size() const noexcept {
  std::size_t n = 0;
  for (const auto& list : runs_) n += list.size();
  return n;
}

std::size_t RunStore::longest() const noexcept {
  std::size_t n = 0;
  for (const auto& list : runs_) {
    for (const auto& r : list) n = std::max(n, r.edges.size());
  }
  return n;
}

}  // namespace apr
