/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "apr/codebook.hpp"
#include "apr/run_store.hpp"

namespace apr {

struct ConsolidationBudget {
  std::size_t max_entities = 50000;
  std::uint64_t max_workspace_bytes = 256ull << 20;
  std::size_t knn_k = 10;
  float tau_e = 0.93f;
  float kmeans_k_fraction = 0.5f;
  std::size_t kmeans_max_iters = 20;
  std::uint64_t seed = 7;
  void validate() const;
};

struct AliasGroup {
  std::vector<EntityId> members;  // ascending
  bool provisional = true;
};

struct Neighbor {
  std::uint32_t index;
  float similarity;
};

/// Nearest-neighbour search over unit rows. The result for row i excludes i.
class KnnBackend {
 public:
  virtual ~KnnBackend() = default;
  virtual std::vector<std::vector<Neighbor>> neighbors(const Matrix& rows, std::size_t k) const = 0;
};

/// Pairwise scan; ties go to the lower index.
class ExactKnn final : public KnnBackend {
 public:
  std::vector<std::vector<Neighbor>> neighbors(const Matrix& rows, std::size_t k) const override;
};

/// Connected components (size >= 2) of the k-NN graph restricted to pairs
/// with cosine >= tau_e. Groups are ordered by their smallest member.
std::vector<AliasGroup> build_alias_groups(const Codebook& codebook, std::size_t knn_k, float tau_e,
                                           const KnnBackend& backend = ExactKnn{});

/// Total idempotent map from entity to representative.
class AliasMap {
 public:
  AliasMap() = default;
  explicit AliasMap(std::size_t entities);

  void assign(EntityId member, EntityId representative);
  EntityId operator()(EntityId e) const;
  std::size_t size() const noexcept { return map_.size(); }
  std::size_t merged() const noexcept;
  bool idempotent() const noexcept;
  std::span<const EntityId> table() const noexcept { return map_; }

 private:
  std::vector<EntityId> map_;
};

/// Index into `members` minimizing summed cosine dissimilarity; ties go to
/// the earliest member.
std::size_t medoid(const Matrix& rows, std::span<const std::size_t> members);

/// Spherical k-means with farthest-point seeding. Returns a cluster index
/// per row; clusters are numbered by seeding order.
std::vector<std::size_t> kmeans_cosine(const Matrix& rows, std::size_t k, std::size_t max_iters, std::uint64_t seed);

/// Layer 2: k-means inside every group larger than one, medoid per cluster.
AliasMap refine_groups(const Codebook& codebook, std::span<const AliasGroup> groups,
                       const ConsolidationBudget& budget);

struct ConsolidationReport {
  std::size_t entities_before = 0;
  std::size_t entities_after = 0;
  std::size_t edges_before = 0;
  std::size_t edges_after = 0;
  std::array<std::size_t, 3> store_length_before{};
  std::array<std::size_t, 3> store_length_after{};
  std::vector<std::pair<std::string, std::string>> aliases;  // member -> representative
};

struct QuotientResult {
  Codebook codebook;
  std::vector<EntityId> entity_map;  // old id -> new id
  std::vector<EdgeId> edge_map;      // old id -> new id
  ConsolidationReport report;
};

/// Remaps edges and sequences through the alias map and deduplicates them.
/// Builds a fresh codebook and never calls the embedding provider.
QuotientResult apply_quotient(const Codebook& codebook, const AliasMap& alias);

/// Remaps run edges through the quotient, keeping first occurrences, and
/// recomputes centroids against the new codebook.
RunStore remap_runs(const RunStore& runs, const QuotientResult& quotient);

bool should_consolidate(const CodebookStats& stats, std::uint64_t workspace_bytes,
                        const ConsolidationBudget& budget);

}  // namespace apr
