/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/selector.hpp"

#include <numeric>
#include <unordered_set>

namespace apr {
namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(SelectorAction a) noexcept {
  switch (a) {
    case SelectorAction::kNotInclude: return "not_include";
    case SelectorAction::kUnique: return "unique";
    case SelectorAction::kIncludeAll: return "include_all";
  }
  return "?";
}

std::optional<SelectorAction> parse_action(std::string_view s) noexcept {
  if (s == "not_include" || s == "none") return SelectorAction::kNotInclude;
  if (s == "unique") return SelectorAction::kUnique;
  if (s == "include_all" || s == "all") return SelectorAction::kIncludeAll;
  return std::nullopt;
}

void SelectorConfig::validate() const {
  if (!(cluster_threshold > 0.0f && cluster_threshold < 1.0f)) {
    throw Error(ErrorCode::kInvalidParams, "cluster threshold must lie in (0,1)");
  }
}

SelectorConfig parse_selection(std::string_view spec, SelectorConfig base) {
  while (!spec.empty()) {
    const auto comma = spec.find(',');
    const auto item = trim(spec.substr(0, comma));
    spec = comma == std::string_view::npos ? std::string_view{} : spec.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::kInvalidArgument, "expected channel=action");
    const auto channel = parse_channel(trim(item.substr(0, eq)));
    const auto action = parse_action(trim(item.substr(eq + 1)));
    if (!channel || !action) throw Error(ErrorCode::kInvalidArgument, "bad selection item: " + std::string(item));
    base.actions[static_cast<std::size_t>(*channel)] = *action;
  }
  return base;
}

std::vector<RunCluster> cluster_runs(std::span<const RunVector> runs, float theta) {
  std::vector<std::size_t> parent(runs.size());
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      if (cosine(runs[i].vector, runs[j].vector) >= theta) {
        const auto a = find_root(parent, i), b = find_root(parent, j);
        parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::vector<std::vector<RunVector>> groups;
  std::vector<std::size_t> slot(runs.size(), SIZE_MAX);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto r = find_root(parent, i);
    if (slot[r] == SIZE_MAX) {
      slot[r] = groups.size();
      groups.emplace_back();
    }
    groups[slot[r]].push_back(runs[i]);
  }
  std::vector<RunCluster> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    RunCluster c;
    for (const auto& m : g) c.members.push_back(m.id);
    c.representative = consensus_representative(g);
    out.push_back(std::move(c));
  }
  return out;
}

RunId consensus_representative(std::span<const RunVector> members) {
  if (members.empty()) throw Error(ErrorCode::kInvalidArgument, "cluster is empty");
  RunId best = members.front().id;
  double best_sum = -std::numeric_limits<double>::infinity();
  for (const auto& r : members) {
    double sum = 0;
    for (const auto& m : members) sum += cosine(r.vector, m.vector);
    if (sum > best_sum || (sum == best_sum && r.id < best)) {
      best = r.id;
      best_sum = sum;
    }
  }
  return best;
}

std::size_t Selection::size() const noexcept {
  return channels[0].size() + channels[1].size() + channels[2].size();
}

Selection apply_selection(std::span<const RankedRun> ranked, const RunStore& store, const SelectorConfig& config) {
  config.validate();
  Selection out;
  for (Channel c : kChannels) {
    std::vector<RankedRun> mine;
    for (const auto& r : ranked) {
      if (r.channel == c) mine.push_back(r);
    }
    auto& dst = out.channels[static_cast<std::size_t>(c)];
    switch (config.action(c)) {
      case SelectorAction::kNotInclude: break;
      case SelectorAction::kIncludeAll: dst = std::move(mine); break;
      case SelectorAction::kUnique: {
        std::vector<RunVector> vecs;
        for (const auto& r : mine) {
          const Run* run = store.find(r.run);
          if (!run) throw Error(ErrorCode::kDanglingId, "selected run not in store");
          vecs.push_back({r.run, run->centroid});
        }
        std::unordered_set<RunId> reps;
        for (const auto& cl : cluster_runs(vecs, config.cluster_threshold)) reps.insert(cl.representative);
        for (auto& r : mine) {
          if (reps.contains(r.run)) dst.push_back(std::move(r));
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace apr
