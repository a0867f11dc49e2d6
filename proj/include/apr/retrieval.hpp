/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "apr/codebook.hpp"
#include "apr/embedding.hpp"
#include "apr/run_store.hpp"

namespace apr {

struct CoarseWeights {
  float entity = 0.6f;
  float relation = 0.4f;
  void validate() const;
};

enum class MpNorm { kSqrt, kLog };

struct FineParams {
  std::size_t top_t = 3;
  float tau_cov = 0.6f;
  float tau_pair = 0.55f;
  float temp_pair = 0.08f;
  float tau_dist = 0.6f;
  float lambda_cov = 0.5f;
  float lambda_mp = 0.3f;
  float lambda_1to1 = 0.4f;
  float lambda_whole = 0.2f;
  MpNorm mp_norm = MpNorm::kSqrt;
  void validate() const;
};

/// Per-term breakdown of a fine score.
struct FineTerms {
  double rel_top_t = 0;
  double coverage_raw = 0;  // count of matched query lines
  double coverage = 0;      // coverage_raw / n_q
  double many_to_many = 0;
  double distinct = 0;
  double whole_gate = 0;
  double score = 0;
};

/// Mean of the `t` largest entries of S (all entries when S has fewer).
template <typename Derived>
double rel_top_t(const Eigen::MatrixBase<Derived>& s, std::size_t t) {
  std::vector<double> flat(s.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j) flat[k++] = static_cast<double>(s(i, j));
  const std::size_t take = std::min(t, flat.size());
  std::partial_sort(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(take), flat.end(), std::greater<>());
  double sum = 0;
  for (std::size_t i = 0; i < take; ++i) sum += flat[i];
  return take ? sum / static_cast<double>(take) : 0.0;
}

/// Number of rows whose best entry reaches `tau`.
template <typename Derived>
double coverage_count(const Eigen::MatrixBase<Derived>& s, double tau) {
  double n = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    if (s.cols() > 0 && static_cast<double>(s.row(i).maxCoeff()) >= tau) n += 1;
  }
  return n;
}

template <typename Derived>
double many_to_many(const Eigen::MatrixBase<Derived>& s, double tau, double temperature, MpNorm norm) {
  double sum = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      sum += 1.0 / (1.0 + std::exp(-(static_cast<double>(s(i, j)) - tau) / temperature));
  const double cells = static_cast<double>(s.rows()) * static_cast<double>(s.cols());
  const double denom = norm == MpNorm::kSqrt ? std::sqrt(cells) : std::log1p(cells);
  return denom > 0 ? sum / denom : 0.0;
}

/// Greedy 1:1 alignment: repeatedly take the largest entry whose row and
/// column are unused, while it reaches `tau`. Returns sum / sqrt(m).
template <typename Derived>
double distinct_one_to_one(const Eigen::MatrixBase<Derived>& s, double tau) {
  struct Cell {
    double v;
    Eigen::Index i, j;
  };
  std::vector<Cell> cells;
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      if (static_cast<double>(s(i, j)) >= tau) cells.push_back({static_cast<double>(s(i, j)), i, j});
  std::stable_sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.v > b.v; });
  std::vector<bool> row_used(static_cast<std::size_t>(s.rows())), col_used(static_cast<std::size_t>(s.cols()));
  double sum = 0;
  std::size_t m = 0;
  for (const auto& c : cells) {
    if (row_used[c.i] || col_used[c.j]) continue;
    row_used[c.i] = col_used[c.j] = true;
    sum += c.v;
    ++m;
  }
  return m ? sum / std::sqrt(static_cast<double>(m)) : 0.0;
}

/// sigmoid((c - 0.5) / 0.1) * c / (1 + log(1 + n_c)).
inline double whole_gate(double fulltext_cosine, std::size_t n_c) {
  const double gate = 1.0 / (1.0 + std::exp(-(fulltext_cosine - 0.5) / 0.1));
  return gate * fulltext_cosine / (1.0 + std::log1p(static_cast<double>(n_c)));
}

/// All five terms on a similarity matrix S (rows = query lines).
template <typename Derived>
FineTerms fine_terms(const Eigen::MatrixBase<Derived>& s, double fulltext_cosine, const FineParams& p) {
  if (s.rows() == 0 || s.cols() == 0) throw Error(ErrorCode::kEmptyLines, "fine scoring needs n_q, n_c >= 1");
  FineTerms t;
  t.rel_top_t = rel_top_t(s, p.top_t);
  t.coverage_raw = coverage_count(s, p.tau_cov);
  t.coverage = t.coverage_raw / static_cast<double>(s.rows());
  t.many_to_many = many_to_many(s, p.tau_pair, p.temp_pair, p.mp_norm);
  t.distinct = distinct_one_to_one(s, p.tau_dist);
  t.whole_gate = whole_gate(fulltext_cosine, static_cast<std::size_t>(s.cols()));
  t.score = t.rel_top_t + p.lambda_cov * t.coverage + p.lambda_mp * t.many_to_many + p.lambda_1to1 * t.distinct +
            p.lambda_whole * t.whole_gate;
  return t;
}

/// Fine score from unit line embeddings (rows) of query and candidate.
FineTerms fine_score(const Matrix& query_lines, const Matrix& candidate_lines, double fulltext_cosine,
                     const FineParams& params);

/// Max-pair symbol-space score between two edge lists.
double coarse_score(const Codebook& codebook, std::span<const EdgeId> query, std::span<const EdgeId> candidate,
                    const CoarseWeights& weights);

/// "h ρ t" linearization of an edge.
std::string line_text(const Codebook& codebook, EdgeId edge);

/// Provider-backed line embeddings with a text-keyed cache.
class LineEmbedder {
 public:
  explicit LineEmbedder(std::shared_ptr<const EmbeddingProvider> provider);

  Matrix lines(const Codebook& codebook, std::span<const EdgeId> edges) const;
  Vector text(const std::string& text) const;
  /// Cosine between the newline-joined line texts of two edge lists.
  double fulltext_cosine(const Codebook& codebook, std::span<const EdgeId> a, std::span<const EdgeId> b) const;

  std::size_t cached() const;

 private:
  std::vector<Vector> embed_cached(const std::vector<std::string>& texts) const;

  std::shared_ptr<const EmbeddingProvider> provider_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, Vector> cache_;
};

struct RetrievalParams {
  std::size_t k = 16;
  std::size_t top_m = 8;
  CoarseWeights coarse;
  FineParams fine;
  void validate() const;
};

struct ShortlistEntry {
  RunId run;
  double coarse = 0;
};

struct RankedRun {
  RunId run;
  Channel channel = Channel::kFact;
  double coarse = 0;
  double fine = 0;
  FineTerms terms;
};

struct RetrievalResult {
  std::vector<RankedRun> ranked;
  std::size_t runs_scanned_coarse = 0;
  std::size_t edges_touched_fine = 0;
  std::size_t shortlist_bound = 0;  // H = channels * k
  std::size_t longest_shortlisted = 0;  // L
  bool fallback = false;  // query had no triples
};

/// Orders by fine score descending, then run id ascending.
void sort_ranked(std::vector<RankedRun>& ranked);

/// Read-only coarse-to-fine retrieval over a codebook and run store.
class Retriever {
 public:
  Retriever(const Codebook& codebook, const RunStore& runs, const LineEmbedder& embedder);

  /// Top-k runs of one channel by coarse score, run id tiebreak.
  std::vector<ShortlistEntry> shortlist(std::span<const EdgeId> query, Channel channel, std::size_t k,
                                        const CoarseWeights& weights, std::size_t* scanned = nullptr) const;

  /// Shortlists every channel, fine re-ranks the union and keeps the top M.
  /// With no query edges, runs are ranked by cos(text vector, run centroid).
  RetrievalResult retrieve(std::span<const EdgeId> query, std::string_view query_text,
                           const RetrievalParams& params) const;

 private:
  const Codebook& codebook_;
  const RunStore& runs_;
  const LineEmbedder& embedder_;
};

}  // namespace apr
