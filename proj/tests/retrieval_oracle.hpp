/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "apr/retrieval.hpp"
#include "apr/segmenter.hpp"

namespace apr::test {

/// Runs over a small hashed vocabulary spread across all channels, plus a
/// query of 1-3 edges.
struct RandomCorpus {
  std::shared_ptr<const EmbeddingProvider> provider;
  Codebook codebook;
  RunStore runs;
  std::vector<EdgeId> query;
};

inline RandomCorpus random_corpus(std::uint64_t seed, std::size_t n_runs, int dim = 32) {
  std::mt19937_64 rng(seed);
  RandomCorpus c{std::make_shared<HashingProvider>(dim, seed), Codebook{}, RunStore{}, {}};
  c.codebook = Codebook(c.provider);
  std::uniform_int_distribution<int> word(0, 39), rel(0, 7), len(1, 4), chan(0, 2);
  auto random_edge = [&] {
    return c.codebook.intern_edge({c.codebook.intern_entity("w" + std::to_string(word(rng))),
                                   c.codebook.intern_relation("rel" + std::to_string(rel(rng))),
                                   c.codebook.intern_entity("w" + std::to_string(word(rng)))});
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < n_runs; ++i) {
    Run r{RunId(0u), kChannels[static_cast<std::size_t>(chan(rng))], {}, {}, 1};
    const int n = len(rng);
    for (int j = 0; j < n; ++j) r.edges.push_back(random_edge());
    finalize_run(c.codebook, r);
    runs.push_back(std::move(r));
  }
  c.runs.append(std::move(runs));
  const int nq = 1 + static_cast<int>(rng() % 3);
  for (int j = 0; j < nq; ++j) c.query.push_back(random_edge());
  return c;
}

inline double many_to_many_oracle(const Eigen::MatrixXf& s, const FineParams& p) {
  double sum = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      sum += 1.0 / (1.0 + std::exp(-(double(s(i, j)) - double(p.tau_pair)) / double(p.temp_pair)));
  const double cells = double(s.rows() * s.cols());
  return sum / (p.mp_norm == MpNorm::kSqrt ? std::sqrt(cells) : std::log(1.0 + cells));
}

/// Five-term score evaluated directly from the definitions.
inline double fine_oracle(const Eigen::MatrixXf& s, double full, const FineParams& p) {
  std::vector<double> flat;
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j) flat.push_back(s(i, j));
  std::sort(flat.rbegin(), flat.rend());
  const std::size_t t = std::min(p.top_t, flat.size());
  double top = 0;
  for (std::size_t i = 0; i < t; ++i) top += flat[i] / double(t);

  double covered = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    double best = -2;
    for (Eigen::Index j = 0; j < s.cols(); ++j) best = std::max(best, double(s(i, j)));
    covered += best >= p.tau_cov ? 1 : 0;
  }

  // Greedy 1:1 by repeated full scans for the largest free entry.
  std::vector<bool> ru(s.rows()), cu(s.cols());
  double dsum = 0;
  int m = 0;
  for (;;) {
    double best = -2;
    Eigen::Index bi = -1, bj = -1;
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      for (Eigen::Index j = 0; j < s.cols(); ++j)
        if (!ru[i] && !cu[j] && double(s(i, j)) >= p.tau_dist && double(s(i, j)) > best) {
          best = s(i, j);
          bi = i;
          bj = j;
        }
    if (bi < 0) break;
    ru[bi] = cu[bj] = true;
    dsum += best;
    ++m;
  }
  const double distinct = m ? dsum / std::sqrt(double(m)) : 0.0;
  const double whole = full / (1.0 + std::exp(-(full - 0.5) / 0.1)) / (1.0 + std::log(1.0 + double(s.cols())));
  return top + p.lambda_cov * covered / double(s.rows()) + p.lambda_mp * many_to_many_oracle(s, p) +
         p.lambda_1to1 * distinct + p.lambda_whole * whole;
}

struct OracleRank {
  RunId run;
  double fine;
};

/// Scores every run of every channel, sorted by fine descending, id ascending.
inline std::vector<OracleRank> brute_force_ranking(const RandomCorpus& c, const FineParams& p) {
  auto texts = [&](std::span<const EdgeId> edges) {
    std::vector<std::string> out;
    std::string joined;
    for (EdgeId id : edges) {
      const Edge& e = c.codebook.edge(id);
      out.push_back(c.codebook.entity(e.head) + " " + c.codebook.relation(e.relation) + " " +
                    c.codebook.entity(e.tail));
      joined += (joined.empty() ? "" : "\n") + out.back();
    }
    out.push_back(joined);
    return out;
  };
  const int d = c.provider->dimension();
  auto embed = [&](const std::vector<std::string>& t, Vector& full) {
    auto v = c.provider->embed(t);
    full = v.back();
    v.pop_back();
    return stack_rows(v, d);
  };
  Vector qfull, cfull;
  const Matrix q = embed(texts(c.query), qfull);
  std::vector<OracleRank> out;
  for (Channel ch : kChannels) {
    for (const auto& run : c.runs.channel(ch)) {
      const Matrix cand = embed(texts(run.edges), cfull);
      const Eigen::MatrixXf s = (q * cand.transpose()).cwiseMax(-1.0f).cwiseMin(1.0f);
      out.push_back({run.id, fine_oracle(s, cosine(qfull, cfull), p)});
    }
  }
  std::sort(out.begin(), out.end(), [](const OracleRank& a, const OracleRank& b) {
    return a.fine != b.fine ? a.fine > b.fine : a.run < b.run;
  });
  return out;
}

}  // namespace apr::test
