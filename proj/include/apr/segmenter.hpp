/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <span>
#include <unordered_set>
#include <vector>

#include "apr/codebook.hpp"
#include "apr/types.hpp"

namespace apr {

struct SegmenterParams {
  float tau = 0.55f;    // acceptance threshold
  float bonus = 0.15f;  // continuity bonus b
  std::size_t window = 4;

  /// Lower bound on intra-run cohesion the parameters are meant to give.
  float cohesion_floor() const noexcept { return tau - bonus; }
  void validate() const;
};

/// A maximal locally coherent run of edges: the retrieval atom.
struct Run {
  RunId id;
  Channel channel = Channel::kFact;
  std::vector<EdgeId> edges;
  Vector centroid;
  float cohesion = 1.0f;  // mean pairwise cosine of member triple vectors
};

/// Normalized mean of the head, relation and tail vectors.
Vector triple_vector(const Codebook& codebook, const Edge& edge);
Vector triple_vector(const Codebook& codebook, EdgeId edge);

/// Open small graph while streaming: node set, running centroid, last tail.
class SmallGraph {
 public:
  SmallGraph(const Edge& first, const Vector& first_vector);

  /// cos(centroid, v) + bonus when the edge continues the path or reuses a node.
  float fit_score(const Edge& edge, const Vector& v, float bonus) const;
  bool continues(const Edge& edge) const;
  void accept(const Edge& edge, const Vector& v);

  const Vector& centroid() const noexcept { return centroid_; }
  std::size_t size() const noexcept { return count_; }

 private:
  std::unordered_set<EntityId> nodes_;
  EntityId last_tail_;
  VectorX<double> sum_;
  Vector centroid_;
  std::size_t count_ = 0;
};

/// Mean pairwise cosine of the rows; 1 for fewer than two rows.
float mean_pairwise_cosine(const Matrix& unit_rows);

/// Recomputes centroid and cohesion of a run from its edges.
void finalize_run(const Codebook& codebook, Run& run);

/// One-pass segmentation: append while fit >= tau, otherwise cut.
/// Run ids are assigned consecutively from `first_id`.
std::vector<Run> segment(const Codebook& codebook, std::span<const EdgeId> edges, Channel channel,
                         const SegmenterParams& params, RunId first_id = RunId(0u));

/// Merge-if-not-a-true-cut over adjacent runs. Each boundary is re-tested by
/// segmenting the last `window` edges on its left followed by the first
/// `window` edges on its right; the boundary is removed when that local
/// segmentation places no cut there. Passes repeat until no boundary
/// changes, so the result is a fixed point. Ids are kept from the left run.
std::vector<Run> refine_boundaries(const Codebook& codebook, std::vector<Run> runs, const SegmenterParams& params);

}  // namespace apr
