/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/codebook.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace apr {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

[[noreturn]] void dangling(std::string_view what, std::size_t id, std::size_t size) {
  throw Error(ErrorCode::kDanglingId,
              std::string(what) + " id " + std::to_string(id) + " (table size " + std::to_string(size) + ")");
}

}  // namespace

std::string normalize_surface(std::string_view surface) {
  std::string out;
  out.reserve(surface.size());
  bool pending_space = false;
  for (char c : surface) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::optional<std::uint32_t> SymbolTable::find(std::string_view surface) const {
  if (auto it = index_.find(surface); it != index_.end()) return it->second;
  return std::nullopt;
}

std::pair<std::uint32_t, bool> SymbolTable::insert(std::string surface) {
  if (auto it = index_.find(surface); it != index_.end()) return {it->second, false};
  const auto id = static_cast<std::uint32_t>(surfaces_.size());
  index_.emplace(surface, id);
  surfaces_.push_back(std::move(surface));
  return {id, true};
}

// ---------------------------------------------------------------------------

Codebook::Codebook(std::shared_ptr<const EmbeddingProvider> provider) : provider_(std::move(provider)) {}

Vector Codebook::embed(const std::string& surface) const {
  if (!provider_) throw Error(ErrorCode::kConfig, "codebook has no embedding provider attached");
  return provider_->embed_one(surface);
}

EntityId Codebook::intern_entity(std::string_view surface) {
  std::string norm = normalize_surface(surface);
  if (norm.empty()) throw Error(ErrorCode::kEmptySurface, "entity surface is empty");
  if (auto id = entities_.find(norm)) return EntityId(*id);
  Vector v = embed(norm);
  const auto [id, inserted] = entities_.insert(std::move(norm));
  entity_vecs_.push_back(std::move(v));
  return EntityId(id);
}

RelationId Codebook::intern_relation(std::string_view surface) {
  std::string norm = normalize_surface(surface);
  if (norm.empty()) throw Error(ErrorCode::kEmptySurface, "relation surface is empty");
  if (auto id = relations_.find(norm)) return RelationId(*id);
  Vector v = embed(norm);
  const auto [id, inserted] = relations_.insert(std::move(norm));
  relation_vecs_.push_back(std::move(v));
  return RelationId(id);
}

EdgeId Codebook::intern_edge(const Edge& edge) {
  check_entity(edge.head);
  check_entity(edge.tail);
  if (edge.relation.index() >= relations_.size()) dangling("relation", edge.relation.index(), relations_.size());
  if (auto it = edge_index_.find(edge); it != edge_index_.end()) return it->second;
  const EdgeId id(edges_.size());
  edges_.push_back(edge);
  edge_index_.emplace(edge, id);
  return id;
}

std::vector<EdgeId> Codebook::intern_triples(std::span<const TripleText> triples) {
  struct Normalized {
    std::string h, r, t;
  };
  std::vector<Normalized> norm;
  norm.reserve(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    Normalized n{normalize_surface(triples[i].head), normalize_surface(triples[i].relation),
                 normalize_surface(triples[i].tail)};
    if (n.h.empty() || n.r.empty() || n.t.empty()) {
      throw Error(ErrorCode::kEmptySurface, "triple #" + std::to_string(i) + " has an empty component");
    }
    norm.push_back(std::move(n));
  }

  // Embed all new symbols in one batch per table before touching state.
  std::vector<std::string> new_entities;
  std::vector<std::string> new_relations;
  std::unordered_set<std::string_view> seen_e;
  std::unordered_set<std::string_view> seen_r;
  for (const auto& n : norm) {
    for (const std::string* s : {&n.h, &n.t}) {
      if (!entities_.find(*s) && seen_e.insert(*s).second) new_entities.push_back(*s);
    }
    if (!relations_.find(n.r) && seen_r.insert(n.r).second) new_relations.push_back(n.r);
  }
  if ((!new_entities.empty() || !new_relations.empty()) && !provider_) {
    throw Error(ErrorCode::kConfig, "codebook has no embedding provider attached");
  }
  auto entity_vecs = provider_ ? provider_->embed(new_entities) : std::vector<Vector>{};
  auto relation_vecs = provider_ ? provider_->embed(new_relations) : std::vector<Vector>{};
  for (std::size_t i = 0; i < new_entities.size(); ++i) {
    entities_.insert(std::move(new_entities[i]));
    entity_vecs_.push_back(std::move(entity_vecs[i]));
  }
  for (std::size_t i = 0; i < new_relations.size(); ++i) {
    relations_.insert(std::move(new_relations[i]));
    relation_vecs_.push_back(std::move(relation_vecs[i]));
  }

  std::vector<EdgeId> ids;
  ids.reserve(norm.size());
  for (const auto& n : norm) {
    const Edge e{EntityId(*entities_.find(n.h)), RelationId(*relations_.find(n.r)),
                 EntityId(*entities_.find(n.t))};
    ids.push_back(intern_edge(e));
  }
  return ids;
}

EdgeSequence Codebook::indexify(std::span<const TripleText> triples, Channel channel, std::string span) {
  EdgeSequence seq{channel, {}, std::move(span)};
  if (triples.empty()) return seq;
  seq.edges = intern_triples(triples);
  stores_[static_cast<std::size_t>(channel)].push_back(seq);
  return seq;
}

TripleText Codebook::decode(EdgeId id) const {
  const Edge& e = edge(id);
  return {entity(e.head), relation(e.relation), entity(e.tail)};
}

std::vector<TripleText> Codebook::decode(std::span<const EdgeId> edges) const {
  std::vector<TripleText> out;
  out.reserve(edges.size());
  for (EdgeId id : edges) out.push_back(decode(id));
  return out;
}

CodebookStats Codebook::stats() const {
  CodebookStats s;
  s.entities = entities_.size();
  s.relations = relations_.size();
  s.edges = edges_.size();
  for (std::size_t c = 0; c < stores_.size(); ++c) {
    s.channels[c].sequences = stores_[c].size();
    for (const auto& seq : stores_[c]) s.channels[c].occurrences += seq.edges.size();
    s.occurrences += s.channels[c].occurrences;
  }
  s.compression_ratio = s.edges == 0 ? 0.0 : static_cast<double>(s.occurrences) / static_cast<double>(s.edges);
  return s;
}

std::optional<EntityId> Codebook::find_entity(std::string_view surface) const {
  if (auto id = entities_.find(normalize_surface(surface))) return EntityId(*id);
  return std::nullopt;
}

std::optional<RelationId> Codebook::find_relation(std::string_view surface) const {
  if (auto id = relations_.find(normalize_surface(surface))) return RelationId(*id);
  return std::nullopt;
}

std::optional<EdgeId> Codebook::find_edge(const Edge& edge) const {
  if (auto it = edge_index_.find(edge); it != edge_index_.end()) return it->second;
  return std::nullopt;
}

void Codebook::check_entity(EntityId id) const {
  if (id.index() >= entities_.size()) dangling("entity", id.index(), entities_.size());
}

const std::string& Codebook::entity(EntityId id) const {
  check_entity(id);
  return entities_.at(id.value);
}

const std::string& Codebook::relation(RelationId id) const {
  if (id.index() >= relations_.size()) dangling("relation", id.index(), relations_.size());
  return relations_.at(id.value);
}

const Edge& Codebook::edge(EdgeId id) const {
  if (id.index() >= edges_.size()) dangling("edge", id.index(), edges_.size());
  return edges_[id.index()];
}

const Vector& Codebook::entity_vector(EntityId id) const {
  check_entity(id);
  return entity_vecs_[id.index()];
}

const Vector& Codebook::relation_vector(RelationId id) const {
  if (id.index() >= relations_.size()) dangling("relation", id.index(), relations_.size());
  return relation_vecs_[id.index()];
}

int Codebook::dimension() const noexcept {
  if (!entity_vecs_.empty()) return static_cast<int>(entity_vecs_.front().size());
  if (!relation_vecs_.empty()) return static_cast<int>(relation_vecs_.front().size());
  return provider_ ? provider_->dimension() : 0;
}

void Codebook::validate() const {
  if (entity_vecs_.size() != entities_.size() || relation_vecs_.size() != relations_.size()) {
    throw Error(ErrorCode::kDanglingId, "embedding table sizes differ from dictionaries");
  }
  const int d = dimension();
  for (const auto& v : entity_vecs_) {
    if (v.size() != d) throw Error(ErrorCode::kDimensionMismatch, "entity vector dimension");
  }
  for (const auto& v : relation_vecs_) {
    if (v.size() != d) throw Error(ErrorCode::kDimensionMismatch, "relation vector dimension");
  }
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    check_entity(e.head);
    check_entity(e.tail);
    if (e.relation.index() >= relations_.size()) dangling("relation", e.relation.index(), relations_.size());
    auto it = edge_index_.find(e);
    if (it == edge_index_.end() || it->second.index() != i) {
      throw Error(ErrorCode::kDanglingId, "edge index out of sync at edge " + std::to_string(i));
    }
  }
  if (edge_index_.size() != edges_.size()) throw Error(ErrorCode::kDanglingId, "duplicate edges in edge table");
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    if (entities_.find(entities_.at(static_cast<std::uint32_t>(i))) != i) {
      throw Error(ErrorCode::kDanglingId, "entity dictionary is not bijective");
    }
  }
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    if (relations_.find(relations_.at(static_cast<std::uint32_t>(i))) != i) {
      throw Error(ErrorCode::kDanglingId, "relation dictionary is not bijective");
    }
  }
  for (std::size_t c = 0; c < stores_.size(); ++c) {
    for (const auto& seq : stores_[c]) {
      if (seq.channel != static_cast<Channel>(c)) {
        throw Error(ErrorCode::kDanglingId, "sequence stored under the wrong channel");
      }
      for (EdgeId id : seq.edges) {
        if (id.index() >= edges_.size()) dangling("edge", id.index(), edges_.size());
      }
    }
  }
}

Codebook Codebook::restore(std::vector<std::string> entities, std::vector<std::string> relations,
                           std::vector<Edge> edges, std::array<std::vector<EdgeSequence>, 3> stores,
                           std::vector<Vector> entity_vecs, std::vector<Vector> relation_vecs,
                           std::shared_ptr<const EmbeddingProvider> provider) {
  Codebook cb(std::move(provider));
  for (auto& s : entities) {
    if (!cb.entities_.insert(std::move(s)).second) {
      throw Error(ErrorCode::kDanglingId, "duplicate entity surface in persisted codebook");
    }
  }
  for (auto& s : relations) {
    if (!cb.relations_.insert(std::move(s)).second) {
      throw Error(ErrorCode::kDanglingId, "duplicate relation surface in persisted codebook");
    }
  }
  cb.entity_vecs_ = std::move(entity_vecs);
  cb.relation_vecs_ = std::move(relation_vecs);
  for (const Edge& e : edges) {
    const auto before = cb.edges_.size();
    cb.intern_edge(e);
    if (cb.edges_.size() == before) throw Error(ErrorCode::kDanglingId, "duplicate edge in persisted codebook");
  }
  cb.stores_ = std::move(stores);
  cb.validate();
  return cb;
}

std::vector<std::size_t> entity_occurrences(const Codebook& codebook) {
  std::vector<std::size_t> counts(codebook.entity_count());
  for (Channel c : kChannels) {
    for (const auto& seq : codebook.store(c)) {
      for (EdgeId id : seq.edges) {
        const Edge& e = codebook.edge(id);
        ++counts[e.head.index()];
        ++counts[e.tail.index()];
      }
    }
  }
  return counts;
}

double top_decile_share(std::span<const std::size_t> counts) {
  std::vector<std::size_t> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  if (total == 0) return 0.0;
  const std::size_t top = std::max<std::size_t>(1, sorted.size() / 10);
  return std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(top), 0.0) / total;
}

}  // namespace apr
