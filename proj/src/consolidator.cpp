/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/consolidator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace apr {
namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

template <typename T>
std::vector<T> uniq_first(std::span<const T> items) {
  std::vector<T> out;
  std::unordered_set<T> seen;
  for (const T& x : items) {
    if (seen.insert(x).second) out.push_back(x);
  }
  return out;
}

}  // namespace

void ConsolidationBudget::validate() const {
  if (max_entities == 0 || max_workspace_bytes == 0 || knn_k == 0 || kmeans_max_iters == 0) {
    throw Error(ErrorCode::kInvalidParams, "consolidation budget values must be positive");
  }
  if (!(tau_e > 0.0f && tau_e < 1.0f)) throw Error(ErrorCode::kInvalidParams, "tau_E must lie in (0,1)");
  if (!(kmeans_k_fraction > 0.0f && kmeans_k_fraction <= 1.0f)) {
    throw Error(ErrorCode::kInvalidParams, "kmeans_k_fraction must lie in (0,1]");
  }
}

std::vector<std::vector<Neighbor>> ExactKnn::neighbors(const Matrix& rows, std::size_t k) const {
  const Matrix sims = rows * rows.transpose();
  const auto n = static_cast<std::size_t>(rows.rows());
  std::vector<std::vector<Neighbor>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& list = out[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) list.push_back({static_cast<std::uint32_t>(j), sims(i, j)});
    }
    const auto take = std::min(k, list.size());
    std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(take), list.end(),
                      [](const Neighbor& a, const Neighbor& b) {
                        if (a.similarity != b.similarity) return a.similarity > b.similarity;
                        return a.index < b.index;
                      });
    list.resize(take);
  }
  return out;
}

std::vector<AliasGroup> build_alias_groups(const Codebook& codebook, std::size_t knn_k, float tau_e,
                                           const KnnBackend& backend) {
  if (knn_k == 0) throw Error(ErrorCode::kInvalidParams, "knn_k must be positive");
  if (!(tau_e > 0.0f && tau_e < 1.0f)) throw Error(ErrorCode::kInvalidParams, "tau_E must lie in (0,1)");
  const std::size_t n = codebook.entity_count();
  if (n < 2) return {};
  const Matrix rows = stack_rows(codebook.entity_vectors(), codebook.dimension());
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto knn = backend.neighbors(rows, knn_k);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& nb : knn[i]) {
      if (nb.similarity < tau_e) continue;
      const auto a = find_root(parent, i), b = find_root(parent, nb.index);
      parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<std::vector<EntityId>> by_root(n);
  for (std::size_t i = 0; i < n; ++i) by_root[find_root(parent, i)].push_back(EntityId(i));
  std::vector<AliasGroup> groups;
  for (auto& members : by_root) {
    if (members.size() > 1) groups.push_back({std::move(members), true});
  }
  return groups;
}

// ---------------------------------------------------------------------------

AliasMap::AliasMap(std::size_t entities) : map_(entities) {
  for (std::size_t i = 0; i < entities; ++i) map_[i] = EntityId(i);
}

void AliasMap::assign(EntityId member, EntityId representative) {
  if (member.index() >= map_.size() || representative.index() >= map_.size()) {
    throw Error(ErrorCode::kInvalidAliasMap, "alias entry out of range");
  }
  map_[member.index()] = representative;
}

EntityId AliasMap::operator()(EntityId e) const {
  if (e.index() >= map_.size()) throw Error(ErrorCode::kInvalidAliasMap, "entity outside alias map");
  return map_[e.index()];
}

std::size_t AliasMap::merged() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < map_.size(); ++i) n += map_[i].index() != i;
  return n;
}

bool AliasMap::idempotent() const noexcept {
  for (const auto& rep : map_) {
    if (rep.index() >= map_.size() || map_[rep.index()] != rep) return false;
  }
  return true;
}

std::size_t medoid(const Matrix& rows, std::span<const std::size_t> members) {
  if (members.empty()) throw Error(ErrorCode::kInvalidArgument, "medoid of an empty cluster");
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < members.size(); ++a) {
    double cost = 0;
    for (std::size_t b : members) {
      cost += 1.0 - static_cast<double>(cosine(rows.row(static_cast<Eigen::Index>(members[a])).transpose(),
                                               rows.row(static_cast<Eigen::Index>(b)).transpose()));
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = a;
    }
  }
  return best;
}

std::vector<std::size_t> kmeans_cosine(const Matrix& rows, std::size_t k, std::size_t max_iters,
                                       std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(rows.rows());
  if (n == 0) return {};
  k = std::clamp<std::size_t>(k, 1, n);
  const MatrixX<double> x = rows.cast<double>();

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> seeds{std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)};
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (seeds.size() < k) {
    const auto last = static_cast<Eigen::Index>(seeds.back());
    std::size_t far = 0;
    double far_d = -1;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], 1.0 - x.row(static_cast<Eigen::Index>(i)).dot(x.row(last)));
      if (nearest[i] > far_d) {
        far_d = nearest[i];
        far = i;
      }
    }
    seeds.push_back(far);
  }
  MatrixX<double> centers(static_cast<Eigen::Index>(k), x.cols());
  for (std::size_t c = 0; c < k; ++c) centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(seeds[c]));

  std::vector<std::size_t> assign(n, SIZE_MAX);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    const MatrixX<double> sims = x * centers.transpose();
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      sims.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
      if (assign[i] != static_cast<std::size_t>(best)) {
        assign[i] = static_cast<std::size_t>(best);
        changed = true;
      }
    }
    if (!changed) break;
    for (std::size_t c = 0; c < k; ++c) {
      VectorX<double> sum = VectorX<double>::Zero(x.cols());
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] == c) sum += x.row(static_cast<Eigen::Index>(i)).transpose();
      }
      if (sum.norm() > 0) centers.row(static_cast<Eigen::Index>(c)) = sum.normalized().transpose();
    }
  }
  return assign;
}

AliasMap refine_groups(const Codebook& codebook, std::span<const AliasGroup> groups,
                       const ConsolidationBudget& budget) {
  budget.validate();
  AliasMap map(codebook.entity_count());
  for (const auto& group : groups) {
    if (group.members.size() < 2) continue;
    std::vector<Vector> vecs;
    for (EntityId e : group.members) vecs.push_back(codebook.entity_vector(e));
    const Matrix rows = stack_rows(vecs, codebook.dimension());
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(budget.kmeans_k_fraction * static_cast<double>(group.members.size()))));
    const auto assign = kmeans_cosine(rows, k, budget.kmeans_max_iters, budget.seed);
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < assign.size(); ++i) {
        if (assign[i] == c) members.push_back(i);
      }
      if (members.empty()) continue;
      const EntityId rep = group.members[members[medoid(rows, members)]];
      for (std::size_t i : members) map.assign(group.members[i], rep);
    }
  }
  return map;
}

// ---------------------------------------------------------------------------

QuotientResult apply_quotient(const Codebook& codebook, const AliasMap& alias) {
  if (alias.size() != codebook.entity_count()) {
    throw Error(ErrorCode::kInvalidAliasMap, "alias map does not cover every entity");
  }
  if (!alias.idempotent()) throw Error(ErrorCode::kInvalidAliasMap, "alias map is not idempotent");

  QuotientResult out;
  auto& report = out.report;
  const auto before = codebook.stats();
  report.entities_before = before.entities;
  report.edges_before = before.edges;

  // Representatives keep their relative order and get fresh dense ids.
  std::vector<std::string> entities;
  std::vector<Vector> entity_vecs;
  out.entity_map.assign(codebook.entity_count(), EntityId{});
  std::vector<bool> kept(codebook.entity_count());
  for (std::size_t i = 0; i < codebook.entity_count(); ++i) {
    if (alias(EntityId(i)).index() != i) continue;
    kept[i] = true;
    out.entity_map[i] = EntityId(entities.size());
    entities.push_back(codebook.entities()[i]);
    entity_vecs.push_back(codebook.entity_vectors()[i]);
  }
  for (std::size_t i = 0; i < codebook.entity_count(); ++i) {
    const EntityId rep = alias(EntityId(i));
    if (!kept[i]) {
      out.entity_map[i] = out.entity_map[rep.index()];
      report.aliases.emplace_back(codebook.entities()[i], codebook.entities()[rep.index()]);
    }
  }

  std::vector<Edge> edges;
  std::unordered_map<Edge, EdgeId> index;
  out.edge_map.reserve(codebook.edge_count());
  for (const Edge& e : codebook.edges()) {
    const Edge mapped{out.entity_map[e.head.index()], e.relation, out.entity_map[e.tail.index()]};
    auto [it, inserted] = index.emplace(mapped, EdgeId(edges.size()));
    if (inserted) edges.push_back(mapped);
    out.edge_map.push_back(it->second);
  }

  std::array<std::vector<EdgeSequence>, 3> stores;
  for (Channel c : kChannels) {
    const auto ci = static_cast<std::size_t>(c);
    for (const auto& seq : codebook.store(c)) {
      std::vector<EdgeId> mapped;
      mapped.reserve(seq.edges.size());
      for (EdgeId id : seq.edges) mapped.push_back(out.edge_map[id.index()]);
      EdgeSequence s{c, uniq_first<EdgeId>(mapped), seq.span};
      report.store_length_before[ci] += seq.edges.size();
      report.store_length_after[ci] += s.edges.size();
      stores[ci].push_back(std::move(s));
    }
  }

  std::vector<std::string> relations(codebook.relations().begin(), codebook.relations().end());
  std::vector<Vector> relation_vecs(codebook.relation_vectors().begin(), codebook.relation_vectors().end());
  out.codebook = Codebook::restore(std::move(entities), std::move(relations), std::move(edges), std::move(stores),
                                   std::move(entity_vecs), std::move(relation_vecs), codebook.provider());
  report.entities_after = out.codebook.entity_count();
  report.edges_after = out.codebook.edge_count();
  return out;
}

RunStore remap_runs(const RunStore& runs, const QuotientResult& quotient) {
  std::vector<Run> remapped;
  for (Channel c : kChannels) {
    for (const Run& run : runs.channel(c)) {
      std::vector<EdgeId> mapped;
      for (EdgeId id : run.edges) mapped.push_back(quotient.edge_map.at(id.index()));
      Run r{run.id, run.channel, uniq_first<EdgeId>(mapped), {}, 1.0f};
      finalize_run(quotient.codebook, r);
      remapped.push_back(std::move(r));
    }
  }
  RunStore out;
  out.restore(std::move(remapped));
  return out;
}

bool should_consolidate(const CodebookStats& stats, std::uint64_t workspace_bytes,
                        const ConsolidationBudget& budget) {
  return stats.entities > budget.max_entities || workspace_bytes > budget.max_workspace_bytes;
}

}  // namespace apr
