/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace apr {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Embedding vectors are 32-bit floats throughout the workspace.
using Vector = VectorX<float>;
/// Row-per-item matrix of embeddings.
using Matrix = MatrixX<float>;

// Dense id in interning order. The tag keeps entity/relation/edge ids apart.
template <typename Tag>
struct DenseId {
  std::uint32_t value = 0;

  constexpr DenseId() = default;
  constexpr explicit DenseId(std::uint32_t v) : value(v) {}
  constexpr explicit DenseId(std::size_t v) : value(static_cast<std::uint32_t>(v)) {}
  constexpr explicit DenseId(int v) : value(static_cast<std::uint32_t>(v)) {}

  constexpr std::size_t index() const noexcept { return value; }
  friend constexpr auto operator<=>(DenseId, DenseId) = default;
};

struct EntityTag;
struct RelationTag;
struct EdgeTag;
struct RunTag;

using EntityId = DenseId<EntityTag>;
using RelationId = DenseId<RelationTag>;
using EdgeId = DenseId<EdgeTag>;
using RunId = DenseId<RunTag>;

struct Edge {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend constexpr auto operator<=>(const Edge&, const Edge&) = default;
};

enum class Channel : std::uint8_t { kQuestion = 0, kAnswer = 1, kFact = 2 };

inline constexpr std::array<Channel, 3> kChannels = {Channel::kQuestion, Channel::kAnswer,
                                                     Channel::kFact};

std::string_view to_string(Channel c) noexcept;
std::optional<Channel> parse_channel(std::string_view s) noexcept;

/// Surface-form triple, as produced by an extractor or returned by decode.
struct TripleText {
  std::string head;
  std::string relation;
  std::string tail;

  friend auto operator<=>(const TripleText&, const TripleText&) = default;
};

}  // namespace apr

template <typename Tag>
struct std::hash<apr::DenseId<Tag>> {
  std::size_t operator()(apr::DenseId<Tag> id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};

template <>
struct std::hash<apr::Edge> {
  std::size_t operator()(const apr::Edge& e) const noexcept {
    std::uint64_t h = e.head.value;
    h = h * 0x9E3779B97F4A7C15ull ^ e.relation.value;
    h = h * 0x9E3779B97F4A7C15ull ^ e.tail.value;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};
