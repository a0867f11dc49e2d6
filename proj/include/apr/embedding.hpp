/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apr/error.hpp"
#include "apr/types.hpp"

namespace apr {

/// Returns `v / ||v||`, or a zero vector when `v` is zero.
template <typename Derived>
auto normalized(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar n = v.norm();
  if (n > Scalar(0)) return VectorX<Scalar>(v / n);
  return VectorX<Scalar>(VectorX<Scalar>::Zero(v.size()));
}

/// Cosine similarity clamped to [-1, 1]. Zero vectors score 0.
template <typename A, typename B>
typename A::Scalar cosine(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(0);
  const Scalar c = a.dot(b.template cast<Scalar>()) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

/// Stacks unit vectors as rows of a matrix.
Matrix stack_rows(std::span<const Vector> rows, int dim);

enum class ProviderKind { kFixture, kHashing, kRemote };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::kHashing;
  int dimension = 64;
  std::uint64_t seed = 7;
  // fixture
  std::filesystem::path fixture_path;
  bool fixture_hashing_fallback = false;
  // remote
  std::string endpoint;
  std::string auth_env;
  std::size_t batch_size = 32;
  int timeout_ms = 10000;
  int retries = 2;
  int max_in_flight = 4;
};

/// Source of unit-norm embeddings. Subclasses implement `compute`; the base
/// class validates inputs, normalizes outputs and counts encoded texts.
class EmbeddingProvider {
 public:
  explicit EmbeddingProvider(int dimension);
  virtual ~EmbeddingProvider() = default;

  EmbeddingProvider(const EmbeddingProvider&) = delete;
  EmbeddingProvider& operator=(const EmbeddingProvider&) = delete;

  std::vector<Vector> embed(std::span<const std::string> texts) const;
  Vector embed_one(std::string_view text) const;

  int dimension() const noexcept { return dimension_; }

  /// Total number of texts encoded since construction.
  std::uint64_t texts_encoded() const noexcept { return texts_encoded_.load(); }

 protected:
  virtual std::vector<Vector> compute(std::span<const std::string> texts) const = 0;

 private:
  int dimension_;
  mutable std::atomic<std::uint64_t> texts_encoded_{0};
};

/// Trigram feature hashing: every character trigram of the padded text adds a
/// seeded pseudo-random ±1 pattern over all dimensions.
class HashingProvider final : public EmbeddingProvider {
 public:
  HashingProvider(int dimension, std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

 protected:
  std::vector<Vector> compute(std::span<const std::string> texts) const override;

 private:
  std::uint64_t seed_;
};

/// Looks texts up in a fixed table. Unknown texts either fall back to a
/// hashing provider or raise UnknownText.
class FixtureProvider final : public EmbeddingProvider {
 public:
  FixtureProvider(std::map<std::string, Vector, std::less<>> table, int dimension,
                  std::unique_ptr<HashingProvider> fallback = nullptr);

  static std::unique_ptr<FixtureProvider> from_file(const std::filesystem::path& path,
                                                    std::unique_ptr<HashingProvider> fallback = nullptr);

  bool contains(std::string_view text) const { return table_.find(text) != table_.end(); }

 protected:
  std::vector<Vector> compute(std::span<const std::string> texts) const override;

 private:
  std::map<std::string, Vector, std::less<>> table_;
  std::unique_ptr<HashingProvider> fallback_;
};

/// HTTP adapter: POST {endpoint}/embed with {"texts":[...]}, expecting
/// {"vectors":[[...],...]}. Batches requests and bounds in-flight calls.
class RemoteProvider final : public EmbeddingProvider {
 public:
  explicit RemoteProvider(const ProviderConfig& config);
  ~RemoteProvider() override;

 protected:
  std::vector<Vector> compute(std::span<const std::string> texts) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config);

}  // namespace apr
