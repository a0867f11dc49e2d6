/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/segmenter.hpp"

#include <algorithm>
#include <optional>

namespace apr {

void SegmenterParams::validate() const {
  if (window < 1) throw Error(ErrorCode::kInvalidParams, "segmenter window must be >= 1");
  if (bonus < 0.0f) throw Error(ErrorCode::kInvalidParams, "continuity bonus must be >= 0");
}

Vector triple_vector(const Codebook& codebook, const Edge& edge) {
  const Vector& h = codebook.entity_vector(edge.head);
  const Vector& r = codebook.relation_vector(edge.relation);
  const Vector& t = codebook.entity_vector(edge.tail);
  if (h.size() != r.size() || h.size() != t.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "triple component dimensions differ");
  }
  return normalized((h + r + t) / 3.0f);
}

Vector triple_vector(const Codebook& codebook, EdgeId edge) { return triple_vector(codebook, codebook.edge(edge)); }

// ---------------------------------------------------------------------------

SmallGraph::SmallGraph(const Edge& first, const Vector& first_vector)
    : last_tail_(first.tail), sum_(VectorX<double>::Zero(first_vector.size())) {
  accept(first, first_vector);
}

bool SmallGraph::continues(const Edge& edge) const {
  return edge.head == last_tail_ || nodes_.contains(edge.head) || nodes_.contains(edge.tail);
}

float SmallGraph::fit_score(const Edge& edge, const Vector& v, float bonus) const {
  return cosine(centroid_, v) + (continues(edge) ? bonus : 0.0f);
}

void SmallGraph::accept(const Edge& edge, const Vector& v) {
  nodes_.insert(edge.head);
  nodes_.insert(edge.tail);
  last_tail_ = edge.tail;
  sum_ += v.cast<double>();
  ++count_;
  centroid_ = normalized(sum_ / static_cast<double>(count_)).cast<float>();
}

// ---------------------------------------------------------------------------

float mean_pairwise_cosine(const Matrix& unit_rows) {
  const Eigen::Index n = unit_rows.rows();
  if (n < 2) return 1.0f;
  const MatrixX<double> rows = unit_rows.cast<double>();
  const MatrixX<double> gram = rows * rows.transpose();
  const double off_diagonal = gram.sum() - gram.trace();
  return static_cast<float>(off_diagonal / static_cast<double>(n * (n - 1)));
}

void finalize_run(const Codebook& codebook, Run& run) {
  if (run.edges.empty()) throw Error(ErrorCode::kEmptyRun, "run has no edges");
  std::vector<Vector> vecs;
  vecs.reserve(run.edges.size());
  VectorX<double> sum = VectorX<double>::Zero(codebook.dimension());
  for (EdgeId e : run.edges) {
    vecs.push_back(triple_vector(codebook, e));
    sum += vecs.back().cast<double>();
  }
  run.centroid = normalized(sum).cast<float>();
  run.cohesion = mean_pairwise_cosine(stack_rows(vecs, codebook.dimension()));
}

std::vector<Run> segment(const Codebook& codebook, std::span<const EdgeId> edges, Channel channel,
                         const SegmenterParams& params, RunId first_id) {
  params.validate();
  std::vector<Run> runs;
  if (edges.empty()) return runs;

  auto next_id = first_id.value;
  std::optional<SmallGraph> graph;
  Run current;
  for (EdgeId id : edges) {
    const Edge& e = codebook.edge(id);
    const Vector v = triple_vector(codebook, e);
    if (graph && graph->fit_score(e, v, params.bonus) >= params.tau) {
      graph->accept(e, v);
      current.edges.push_back(id);
      continue;
    }
    if (graph) {
      finalize_run(codebook, current);
      runs.push_back(std::move(current));
    }
    current = Run{RunId(next_id++), channel, {id}, {}, 1.0f};
    graph.emplace(e, v);
  }
  finalize_run(codebook, current);
  runs.push_back(std::move(current));
  return runs;
}

namespace {

// True when segmenting the boundary window keeps a cut at the original boundary.
bool is_true_cut(const Codebook& codebook, const Run& left, const Run& right, const SegmenterParams& params) {
  const std::size_t nl = std::min(params.window, left.edges.size());
  const std::size_t nr = std::min(params.window, right.edges.size());
  std::vector<EdgeId> window(left.edges.end() - static_cast<std::ptrdiff_t>(nl), left.edges.end());
  window.insert(window.end(), right.edges.begin(), right.edges.begin() + static_cast<std::ptrdiff_t>(nr));

  const auto local = segment(codebook, window, left.channel, params);
  std::size_t offset = 0;
  for (const auto& run : local) {
    offset += run.edges.size();
    if (offset == nl) return true;
    if (offset > nl) break;
  }
  return false;
}

}  // namespace

std::vector<Run> refine_boundaries(const Codebook& codebook, std::vector<Run> runs, const SegmenterParams& params) {
  params.validate();
  bool changed = true;
  while (changed && runs.size() > 1) {
    changed = false;
    std::vector<Run> merged;
    merged.reserve(runs.size());
    merged.push_back(std::move(runs.front()));
    for (std::size_t i = 1; i < runs.size(); ++i) {
      Run& left = merged.back();
      if (is_true_cut(codebook, left, runs[i], params)) {
        merged.push_back(std::move(runs[i]));
        continue;
      }
      left.edges.insert(left.edges.end(), runs[i].edges.begin(), runs[i].edges.end());
      finalize_run(codebook, left);
      changed = true;
    }
    runs = std::move(merged);
  }
  return runs;
}

}  // namespace apr
