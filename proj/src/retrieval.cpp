/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/retrieval.hpp"

#include <set>
#include <stdexcept>

namespace apr {
namespace {

bool unit_interval(float v) { return v >= 0.0f && v <= 1.0f; }

// Largest cosine between any row of a and any row of b.
double max_pair(const Matrix& a, const Matrix& b) {
  const Matrix s = a * b.transpose();
  return std::clamp(static_cast<double>(s.maxCoeff()), -1.0, 1.0);
}

template <typename Id>
Matrix symbol_rows(std::span<const Vector> table, const std::set<Id>& ids, int dim) {
  Matrix m(static_cast<Eigen::Index>(ids.size()), dim);
  Eigen::Index r = 0;
  for (Id id : ids) m.row(r++) = table[id.index()].transpose();
  return m;
}

}  // namespace

void CoarseWeights::validate() const {
  if (entity < 0 || relation < 0 || std::abs(entity + relation - 1.0f) > 1e-5f) {
    throw Error(ErrorCode::kInvalidParams, "coarse weights must be non-negative and sum to 1");
  }
}

void FineParams::validate() const {
  if (top_t < 1) throw Error(ErrorCode::kInvalidParams, "top_t must be >= 1");
  if (!unit_interval(tau_cov) || !unit_interval(tau_pair) || !unit_interval(tau_dist)) {
    throw Error(ErrorCode::kInvalidParams, "fine thresholds must lie in [0,1]");
  }
  if (!(temp_pair > 0)) throw Error(ErrorCode::kInvalidParams, "T_pair must be > 0");
  if (lambda_cov < 0 || lambda_mp < 0 || lambda_1to1 < 0 || lambda_whole < 0) {
    throw Error(ErrorCode::kInvalidParams, "fine weights must be >= 0");
  }
}

void RetrievalParams::validate() const {
  if (k < 1) throw Error(ErrorCode::kInvalidParams, "k must be >= 1");
  coarse.validate();
  fine.validate();
}

FineTerms fine_score(const Matrix& query_lines, const Matrix& candidate_lines, double fulltext_cosine,
                     const FineParams& params) {
  if (query_lines.rows() == 0 || candidate_lines.rows() == 0) {
    throw Error(ErrorCode::kEmptyLines, "fine scoring needs n_q, n_c >= 1");
  }
  if (query_lines.cols() != candidate_lines.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "query and candidate line dimensions differ");
  }
  const Matrix s = (query_lines * candidate_lines.transpose()).cwiseMax(-1.0f).cwiseMin(1.0f);
  return fine_terms(s, fulltext_cosine, params);
}

double coarse_score(const Codebook& codebook, std::span<const EdgeId> query, std::span<const EdgeId> candidate,
                    const CoarseWeights& weights) {
  if (query.empty() || candidate.empty()) throw Error(ErrorCode::kEmptyRun, "coarse scoring needs non-empty runs");
  auto collect = [&](std::span<const EdgeId> edges, std::set<EntityId>& ents, std::set<RelationId>& rels) {
    for (EdgeId id : edges) {
      const Edge& e = codebook.edge(id);
      ents.insert(e.head);
      ents.insert(e.tail);
      rels.insert(e.relation);
    }
  };
  std::set<EntityId> qe, ce;
  std::set<RelationId> qr, cr;
  collect(query, qe, qr);
  collect(candidate, ce, cr);
  const int dim = codebook.dimension();
  const double ent = max_pair(symbol_rows(codebook.entity_vectors(), qe, dim),
                              symbol_rows(codebook.entity_vectors(), ce, dim));
  const double rel = max_pair(symbol_rows(codebook.relation_vectors(), qr, dim),
                              symbol_rows(codebook.relation_vectors(), cr, dim));
  return weights.entity * ent + weights.relation * rel;
}

std::string line_text(const Codebook& codebook, EdgeId edge) {
  const Edge& e = codebook.edge(edge);
  return codebook.entity(e.head) + " " + codebook.relation(e.relation) + " " + codebook.entity(e.tail);
}

// ---------------------------------------------------------------------------

LineEmbedder::LineEmbedder(std::shared_ptr<const EmbeddingProvider> provider) : provider_(std::move(provider)) {
  if (!provider_) throw Error(ErrorCode::kInvalidArgument, "line embedder needs a provider");
}

std::vector<Vector> LineEmbedder::embed_cached(const std::vector<std::string>& texts) const {
  std::vector<std::string> missing;
  {
    std::lock_guard lock(mutex_);
    std::set<std::string_view> seen;
    for (const auto& t : texts) {
      if (!cache_.contains(t) && seen.insert(t).second) missing.push_back(t);
    }
  }
  // Embed outside the lock; a concurrent duplicate embed is harmless.
  std::vector<Vector> fresh;
  if (!missing.empty()) fresh = provider_->embed(missing);
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < missing.size(); ++i) cache_.emplace(missing[i], std::move(fresh[i]));
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(cache_.at(t));
  return out;
}

Matrix LineEmbedder::lines(const Codebook& codebook, std::span<const EdgeId> edges) const {
  std::vector<std::string> texts;
  texts.reserve(edges.size());
  for (EdgeId e : edges) texts.push_back(line_text(codebook, e));
  return stack_rows(embed_cached(texts), provider_->dimension());
}

Vector LineEmbedder::text(const std::string& text) const { return embed_cached({text}).front(); }

double LineEmbedder::fulltext_cosine(const Codebook& codebook, std::span<const EdgeId> a,
                                     std::span<const EdgeId> b) const {
  auto joined = [&](std::span<const EdgeId> edges) {
    std::string out;
    for (EdgeId e : edges) {
      if (!out.empty()) out += '\n';
      out += line_text(codebook, e);
    }
    return out;
  };
  return cosine(text(joined(a)), text(joined(b)));
}

std::size_t LineEmbedder::cached() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

// ---------------------------------------------------------------------------

void sort_ranked(std::vector<RankedRun>& ranked) {
  std::sort(ranked.begin(), ranked.end(), [](const RankedRun& a, const RankedRun& b) {
    if (a.fine != b.fine) return a.fine > b.fine;
    return a.run < b.run;
  });
}

Retriever::Retriever(const Codebook& codebook, const RunStore& runs, const LineEmbedder& embedder)
    : codebook_(codebook), runs_(runs), embedder_(embedder) {}

std::vector<ShortlistEntry> Retriever::shortlist(std::span<const EdgeId> query, Channel channel, std::size_t k,
                                                 const CoarseWeights& weights, std::size_t* scanned) const {
  if (k < 1) throw Error(ErrorCode::kInvalidParams, "k must be >= 1");
  const auto& runs = runs_.channel(channel);
  std::vector<ShortlistEntry> all;
  all.reserve(runs.size());
  for (const auto& run : runs) all.push_back({run.id, coarse_score(codebook_, query, run.edges, weights)});
  if (scanned) *scanned += runs.size();
  const auto take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                    [](const ShortlistEntry& a, const ShortlistEntry& b) {
                      if (a.coarse != b.coarse) return a.coarse > b.coarse;
                      return a.run < b.run;
                    });
  all.resize(take);
  return all;
}

RetrievalResult Retriever::retrieve(std::span<const EdgeId> query, std::string_view query_text,
                                    const RetrievalParams& params) const {
  params.validate();
  RetrievalResult result;
  result.shortlist_bound = kChannels.size() * params.k;

  if (query.empty()) {
    result.fallback = true;
    if (query_text.empty()) return result;
    const Vector q = embedder_.text(std::string(query_text));
    for (Channel c : kChannels) {
      std::vector<RankedRun> scored;
      for (const auto& run : runs_.channel(c)) {
        const double s = cosine(q, run.centroid);
        scored.push_back({run.id, c, s, s, {}});
      }
      result.runs_scanned_coarse += scored.size();
      sort_ranked(scored);
      if (scored.size() > params.k) scored.resize(params.k);
      result.ranked.insert(result.ranked.end(), scored.begin(), scored.end());
    }
    sort_ranked(result.ranked);
    if (result.ranked.size() > params.top_m) result.ranked.resize(params.top_m);
    return result;
  }

  const Matrix query_lines = embedder_.lines(codebook_, query);
  for (Channel c : kChannels) {
    for (const auto& entry : shortlist(query, c, params.k, params.coarse, &result.runs_scanned_coarse)) {
      const Run& run = *runs_.find(entry.run);
      result.edges_touched_fine += run.edges.size();
      result.longest_shortlisted = std::max(result.longest_shortlisted, run.edges.size());
      const Matrix cand = embedder_.lines(codebook_, run.edges);
      const double full = embedder_.fulltext_cosine(codebook_, query, run.edges);
      FineTerms terms = fine_score(query_lines, cand, full, params.fine);
      result.ranked.push_back({run.id, c, entry.coarse, terms.score, terms});
    }
  }
  if (result.edges_touched_fine > result.shortlist_bound * result.longest_shortlisted) {
    throw std::logic_error("fine stage touched more edges than H * L");
  }
  sort_ranked(result.ranked);
  if (result.ranked.size() > params.top_m) result.ranked.resize(params.top_m);
  return result;
}

}  // namespace apr
