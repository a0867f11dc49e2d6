/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "apr/codebook.hpp"
#include "apr/embedding.hpp"
#include "apr/segmenter.hpp"

namespace apr::test {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(APR_FIXTURE_DIR) / name;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("apr-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline Vector random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<float> g;
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = g(rng);
  return v.normalized();
}

inline Vector perturb(const Vector& base, float noise, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0f, noise / std::sqrt(static_cast<float>(base.size())));
  Vector v = base;
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += g(rng);
  return v.normalized();
}

inline Vector axis(int dim, int i, float scale = 1.0f) {
  Vector v = Vector::Zero(dim);
  v[i] = scale;
  return v;
}

using Table = std::map<std::string, Vector, std::less<>>;

/// Table-backed provider; texts outside the table are hashed.
inline std::shared_ptr<const EmbeddingProvider> table_provider(Table table, int dim, bool fallback = true) {
  return std::make_shared<FixtureProvider>(std::move(table), dim,
                                           fallback ? std::make_unique<HashingProvider>(dim, 7) : nullptr);
}

/// A stream of edges drawn in topic blocks. Every symbol sits close to its
/// topic direction, so consecutive edges of one block are highly similar and
/// edges of different topics are nearly orthogonal.
struct TopicWorld {
  std::shared_ptr<const EmbeddingProvider> provider;
  Codebook codebook;
  std::vector<EdgeId> stream;
  std::vector<int> block_topic;  // topic of each edge
};

struct TopicWorldOptions {
  int dim = 32;
  int topics = 4;
  int entities_per_topic = 6;
  int relations_per_topic = 3;
  int blocks = 8;
  int min_block = 2;
  int max_block = 7;
  float noise = 0.15f;
};

inline TopicWorld topic_world(std::uint64_t seed, const TopicWorldOptions& o = {}) {
  std::mt19937_64 rng(seed);
  Table table;
  std::vector<Vector> topics;
  for (int k = 0; k < o.topics; ++k) topics.push_back(random_unit(rng, o.dim));
  auto ent = [](int k, int i) { return "t" + std::to_string(k) + "_e" + std::to_string(i); };
  auto rel = [](int k, int i) { return "t" + std::to_string(k) + "_r" + std::to_string(i); };
  for (int k = 0; k < o.topics; ++k) {
    for (int i = 0; i < o.entities_per_topic; ++i) table.emplace(ent(k, i), perturb(topics[k], o.noise, rng));
    for (int i = 0; i < o.relations_per_topic; ++i) table.emplace(rel(k, i), perturb(topics[k], o.noise, rng));
  }
  TopicWorld w{table_provider(std::move(table), o.dim, false), Codebook{}, {}, {}};
  w.codebook = Codebook(w.provider);
  std::uniform_int_distribution<int> len(o.min_block, o.max_block), pick_e(0, o.entities_per_topic - 1),
      pick_r(0, o.relations_per_topic - 1), pick_t(0, o.topics - 1);
  int last = -1;
  for (int b = 0; b < o.blocks; ++b) {
    int k = pick_t(rng);
    while (o.topics > 1 && k == last) k = pick_t(rng);
    last = k;
    const int n = len(rng);
    for (int j = 0; j < n; ++j) {
      const int h = pick_e(rng);
      int t = pick_e(rng);
      while (t == h) t = pick_e(rng);
      w.stream.push_back(w.codebook.intern_edge(
          Edge{w.codebook.intern_entity(ent(k, h)), w.codebook.intern_relation(rel(k, pick_r(rng))),
               w.codebook.intern_entity(ent(k, t))}));
      w.block_topic.push_back(k);
    }
  }
  return w;
}

}  // namespace apr::test
