/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "apr/embedding.hpp"
#include "apr/types.hpp"

namespace apr {

/// Trims and collapses runs of ASCII whitespace to one space. Case is kept.
std::string normalize_surface(std::string_view surface);

struct EdgeSequence {
  Channel channel = Channel::kFact;
  std::vector<EdgeId> edges;
  std::string span;  // provenance token
};

struct ChannelStats {
  std::size_t sequences = 0;
  std::size_t occurrences = 0;
};

struct CodebookStats {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t edges = 0;
  std::array<ChannelStats, 3> channels{};
  std::size_t occurrences = 0;
  /// occurrences / edges, or 0 for an empty codebook.
  double compression_ratio = 0.0;
};

/// Interned surface dictionary: dense ids in insertion order.
class SymbolTable {
 public:
  std::optional<std::uint32_t> find(std::string_view surface) const;
  /// Returns {id, inserted}.
  std::pair<std::uint32_t, bool> insert(std::string surface);

  const std::string& at(std::uint32_t id) const { return surfaces_.at(id); }
  std::size_t size() const noexcept { return surfaces_.size(); }
  std::span<const std::string> surfaces() const noexcept { return surfaces_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> index_;
};

/// The meta-codebook: entity and relation dictionaries with their embedding
/// tables, the unique edge set and per-channel edge-id sequence stores.
///
/// A Codebook is a value type; copies are independent snapshots that can be
/// handed to other threads. Mutating calls need exclusive access.
class Codebook {
 public:
  Codebook() = default;
  /// `provider` embeds newly interned surfaces; may be null for codebooks
  /// that are only restored and remapped, never extended.
  explicit Codebook(std::shared_ptr<const EmbeddingProvider> provider);

  EntityId intern_entity(std::string_view surface);
  RelationId intern_relation(std::string_view surface);
  EdgeId intern_edge(const Edge& edge);

  /// Interns every symbol and edge, appends the sequence to the channel
  /// store and returns it. An empty triple list leaves the codebook untouched.
  EdgeSequence indexify(std::span<const TripleText> triples, Channel channel, std::string span);

  /// Same as indexify but without appending to a store.
  std::vector<EdgeId> intern_triples(std::span<const TripleText> triples);

  std::vector<TripleText> decode(std::span<const EdgeId> edges) const;
  std::vector<TripleText> decode(const EdgeSequence& seq) const { return decode(seq.edges); }
  TripleText decode(EdgeId id) const;

  CodebookStats stats() const;

  std::optional<EntityId> find_entity(std::string_view surface) const;
  std::optional<RelationId> find_relation(std::string_view surface) const;
  std::optional<EdgeId> find_edge(const Edge& edge) const;

  const std::string& entity(EntityId id) const;
  const std::string& relation(RelationId id) const;
  const Edge& edge(EdgeId id) const;
  const Vector& entity_vector(EntityId id) const;
  const Vector& relation_vector(RelationId id) const;

  std::size_t entity_count() const noexcept { return entities_.size(); }
  std::size_t relation_count() const noexcept { return relations_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::span<const std::string> entities() const noexcept { return entities_.surfaces(); }
  std::span<const std::string> relations() const noexcept { return relations_.surfaces(); }
  std::span<const Edge> edges() const noexcept { return edges_; }
  std::span<const Vector> entity_vectors() const noexcept { return entity_vecs_; }
  std::span<const Vector> relation_vectors() const noexcept { return relation_vecs_; }

  const std::vector<EdgeSequence>& store(Channel c) const { return stores_[static_cast<std::size_t>(c)]; }

  /// Embedding dimension, or 0 when nothing has been embedded yet and no
  /// provider is attached.
  int dimension() const noexcept;

  const std::shared_ptr<const EmbeddingProvider>& provider() const noexcept { return provider_; }
  void set_provider(std::shared_ptr<const EmbeddingProvider> provider) { provider_ = std::move(provider); }

  /// Throws DanglingId (or DimensionMismatch) on any broken reference.
  void validate() const;

  /// Rebuilds a codebook from persisted parts without calling the provider.
  static Codebook restore(std::vector<std::string> entities, std::vector<std::string> relations,
                          std::vector<Edge> edges, std::array<std::vector<EdgeSequence>, 3> stores,
                          std::vector<Vector> entity_vecs, std::vector<Vector> relation_vecs,
                          std::shared_ptr<const EmbeddingProvider> provider);

 private:
  void check_entity(EntityId id) const;
  Vector embed(const std::string& surface) const;

  std::shared_ptr<const EmbeddingProvider> provider_;
  SymbolTable entities_;
  SymbolTable relations_;
  std::vector<Edge> edges_;
  std::unordered_map<Edge, EdgeId> edge_index_;
  std::array<std::vector<EdgeSequence>, 3> stores_;
  std::vector<Vector> entity_vecs_;
  std::vector<Vector> relation_vecs_;
};

/// Head and tail occurrences of every entity across all stored sequences.
std::vector<std::size_t> entity_occurrences(const Codebook& codebook);

/// Share of all occurrences held by the most frequent tenth of the symbols
/// (at least one symbol). 0 when there are no occurrences.
double top_decile_share(std::span<const std::size_t> counts);

}  // namespace apr
