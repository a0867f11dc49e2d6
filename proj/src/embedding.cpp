/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/embedding.hpp"

#include <cstdlib>
#include <fstream>
#include <semaphore>

#include <json.hpp>

#include "hash.hpp"
#include "http_endpoint.hpp"

namespace apr {

Matrix stack_rows(std::span<const Vector> rows, int dim) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "row " + std::to_string(i) + " has " + std::to_string(rows[i].size()));
    }
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

EmbeddingProvider::EmbeddingProvider(int dimension) : dimension_(dimension) {
  if (dimension <= 0) throw Error(ErrorCode::kInvalidParams, "embedding dimension must be positive");
}

std::vector<Vector> EmbeddingProvider::embed(std::span<const std::string> texts) const {
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw Error(ErrorCode::kEmptyText, "text #" + std::to_string(i) + " is empty");
  }
  if (texts.empty()) return {};
  std::vector<Vector> out = compute(texts);
  if (out.size() != texts.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "provider returned " + std::to_string(out.size()) +
                                                   " vectors for " + std::to_string(texts.size()) + " texts");
  }
  for (auto& v : out) {
    if (v.size() != dimension_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "expected dimension " + std::to_string(dimension_) + ", got " + std::to_string(v.size()));
    }
    v = normalized(v);
  }
  texts_encoded_ += texts.size();
  return out;
}

Vector EmbeddingProvider::embed_one(std::string_view text) const {
  const std::string owned(text);
  return embed(std::span<const std::string>(&owned, 1)).front();
}

// ---------------------------------------------------------------------------

HashingProvider::HashingProvider(int dimension, std::uint64_t seed)
    : EmbeddingProvider(dimension), seed_(seed) {}

std::vector<Vector> HashingProvider::compute(std::span<const std::string> texts) const {
  std::vector<Vector> out;
  out.reserve(texts.size());
  const int d = dimension();
  for (const auto& text : texts) {
    // \x02 and \x03 mark the word boundaries so 1- and 2-byte texts still
    // produce at least one trigram.
    std::string padded;
    padded.reserve(text.size() + 2);
    padded.push_back('\x02');
    padded += text;
    padded.push_back('\x03');

    Vector v = Vector::Zero(d);
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      std::uint64_t state = detail::fnv1a(std::string_view(padded).substr(i, 3), seed_);
      for (int j = 0; j < d; j += 64) {
        const std::uint64_t bits = detail::splitmix64(state);
        for (int b = 0; b < 64 && j + b < d; ++b) v[j + b] += ((bits >> b) & 1u) ? 1.0f : -1.0f;
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------

FixtureProvider::FixtureProvider(std::map<std::string, Vector, std::less<>> table, int dimension,
                                 std::unique_ptr<HashingProvider> fallback)
    : EmbeddingProvider(dimension), table_(std::move(table)), fallback_(std::move(fallback)) {
  for (const auto& [key, v] : table_) {
    if (v.size() != dimension) {
      throw Error(ErrorCode::kDimensionMismatch, "fixture entry '" + key + "' has dimension " +
                                                     std::to_string(v.size()));
    }
    if (v.norm() == 0.0f) throw Error(ErrorCode::kInvalidParams, "fixture entry '" + key + "' is zero");
  }
  if (fallback_ && fallback_->dimension() != dimension) {
    throw Error(ErrorCode::kDimensionMismatch, "fallback provider dimension differs from fixture");
  }
}

std::unique_ptr<FixtureProvider> FixtureProvider::from_file(const std::filesystem::path& path,
                                                            std::unique_ptr<HashingProvider> fallback) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open fixture file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, "fixture " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kConfig, "fixture must map strings to float lists");
  std::map<std::string, Vector, std::less<>> table;
  int dim = -1;
  for (const auto& [key, value] : doc.items()) {
    const auto list = value.get<std::vector<float>>();
    if (dim < 0) dim = static_cast<int>(list.size());
    table.emplace(key, Eigen::Map<const Vector>(list.data(), static_cast<Eigen::Index>(list.size())));
  }
  if (dim <= 0) {
    if (!fallback) throw Error(ErrorCode::kConfig, "fixture " + path.string() + " is empty");
    dim = fallback->dimension();
  }
  return std::make_unique<FixtureProvider>(std::move(table), dim, std::move(fallback));
}

std::vector<Vector> FixtureProvider::compute(std::span<const std::string> texts) const {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    if (auto it = table_.find(text); it != table_.end()) {
      out.push_back(it->second);
    } else if (fallback_) {
      out.push_back(fallback_->embed_one(text));
    } else {
      throw Error(ErrorCode::kUnknownText, "no fixture vector for '" + text + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct RemoteProvider::Impl {
  detail::HttpEndpoint endpoint;
  std::string token;
  std::size_t batch_size;
  int timeout_ms;
  int retries;
  mutable std::counting_semaphore<1024> in_flight;

  explicit Impl(const ProviderConfig& c)
      : endpoint(detail::HttpEndpoint::parse(c.endpoint)),
        batch_size(std::max<std::size_t>(1, c.batch_size)),
        timeout_ms(c.timeout_ms),
        retries(std::max(0, c.retries)),
        in_flight(std::clamp(c.max_in_flight, 1, 1024)) {
    if (!c.auth_env.empty()) {
      if (const char* v = std::getenv(c.auth_env.c_str())) token = v;
    }
  }
};

RemoteProvider::RemoteProvider(const ProviderConfig& config)
    : EmbeddingProvider(config.dimension), impl_(std::make_unique<Impl>(config)) {}

RemoteProvider::~RemoteProvider() = default;

std::vector<Vector> RemoteProvider::compute(std::span<const std::string> texts) const {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += impl_->batch_size) {
    const auto batch = texts.subspan(start, std::min(impl_->batch_size, texts.size() - start));
    nlohmann::json body = {{"texts", std::vector<std::string>(batch.begin(), batch.end())}};

    impl_->in_flight.acquire();
    std::string response;
    try {
      response = detail::post_json(impl_->endpoint, "/embed", body.dump(), impl_->token, impl_->timeout_ms,
                                   impl_->retries);
    } catch (...) {
      impl_->in_flight.release();
      throw;
    }
    impl_->in_flight.release();

    try {
      const auto doc = nlohmann::json::parse(response);
      const auto& vectors = doc.at("vectors");
      if (!vectors.is_array() || vectors.size() != batch.size()) {
        throw Error(ErrorCode::kRemoteUnavailable, "embedding response has wrong vector count");
      }
      for (const auto& row : vectors) {
        const auto list = row.get<std::vector<float>>();
        out.emplace_back(Eigen::Map<const Vector>(list.data(), static_cast<Eigen::Index>(list.size())));
      }
    } catch (const nlohmann::json::exception& e) {
      throw RemoteError(200, std::string("malformed embedding response: ") + e.what());
    }
  }
  return out;
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
  switch (config.kind) {
    case ProviderKind::kHashing:
      return std::make_unique<HashingProvider>(config.dimension, config.seed);
    case ProviderKind::kFixture: {
      std::unique_ptr<HashingProvider> fallback;
      if (config.fixture_hashing_fallback) {
        fallback = std::make_unique<HashingProvider>(config.dimension, config.seed);
      }
      auto p = FixtureProvider::from_file(config.fixture_path, std::move(fallback));
      if (p->dimension() != config.dimension) {
        throw Error(ErrorCode::kDimensionMismatch, "fixture dimension " + std::to_string(p->dimension()) +
                                                       " differs from configured " +
                                                       std::to_string(config.dimension));
      }
      return p;
    }
    case ProviderKind::kRemote:
      return std::make_unique<RemoteProvider>(config);
  }
  throw Error(ErrorCode::kConfig, "unknown provider kind");
}

}  // namespace apr
