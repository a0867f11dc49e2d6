/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "apr/retrieval.hpp"
#include "apr/segmenter.hpp"
#include "retrieval_oracle.hpp"
#include "support.hpp"

using namespace apr;

namespace {

Eigen::MatrixXf mat(std::initializer_list<std::initializer_list<float>> rows) {
  Eigen::MatrixXf m(rows.size(), rows.begin()->size());
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (float v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("2x2 fixture: every term matches hand evaluation") {
  FineParams p;
  p.top_t = 1;
  p.tau_cov = 0.5f;
  p.tau_dist = 0.5f;
  const auto s = mat({{1, 0}, {0, 0}});
  const double full = 0.8;
  const auto t = fine_terms(s, full, p);
  CHECK(t.rel_top_t == 1.0);
  CHECK(t.coverage_raw == 1.0);
  CHECK(t.coverage == 0.5);
  CHECK(t.distinct == 1.0);
  const double sig = [&](double x) { return 1.0 / (1.0 + std::exp(-(x - double(p.tau_pair)) / double(p.temp_pair))); }(1.0);
  const double sig0 = 1.0 / (1.0 + std::exp(double(p.tau_pair) / double(p.temp_pair)));
  CHECK(t.many_to_many == doctest::Approx((sig + 3 * sig0) / 2.0).epsilon(1e-12));
  const double gate = 1.0 / (1.0 + std::exp(-(full - 0.5) / 0.1)) * full / (1.0 + std::log(3.0));
  CHECK(t.whole_gate == doctest::Approx(gate).epsilon(1e-12));
  CHECK(t.score == doctest::Approx(1.0 + p.lambda_cov * 0.5 + p.lambda_mp * t.many_to_many + p.lambda_1to1 * 1.0 +
                                   p.lambda_whole * gate)
                       .epsilon(1e-12));
}

TEST_CASE("identical lines and the all-zero matrix") {
  FineParams p;
  p.tau_cov = 0.9f;
  const auto t = fine_terms(Eigen::MatrixXf::Identity(3, 3), 1.0, p);
  CHECK(t.coverage == 1.0);
  CHECK(t.rel_top_t == 1.0);
  CHECK(t.distinct == doctest::Approx(3.0 / std::sqrt(3.0)));

  const auto z = fine_terms(Eigen::MatrixXf::Zero(2, 2), 0.0, p);
  CHECK(z.rel_top_t == 0.0);
  CHECK(z.coverage == 0.0);
  CHECK(z.distinct == 0.0);
  CHECK(z.whole_gate == 0.0);
  // The sigmoid never reaches 0, so the pair term keeps a small residue.
  CHECK(z.many_to_many == doctest::Approx(test::many_to_many_oracle(Eigen::MatrixXf::Zero(2, 2), p)));
  CHECK(z.many_to_many < 1e-2);
  CHECK_THROWS_AS(fine_terms(Eigen::MatrixXf(0, 2), 0.0, p), Error);
}

TEST_CASE("log normalization and the unit term helpers") {
  FineParams p;
  p.mp_norm = MpNorm::kLog;
  const auto s = mat({{0.9f, 0.7f, 0.1f}});
  CHECK(fine_terms(s, 0.5, p).many_to_many == doctest::Approx(test::many_to_many_oracle(s, p)));
  CHECK(rel_top_t(s, 2) == doctest::Approx(0.8));
  CHECK(rel_top_t(s, 10) == doctest::Approx(1.7 / 3));
  CHECK(coverage_count(mat({{0.59f}, {0.6f}}), 0.6) == 1.0);
  // Greedy takes 0.9 first, which blocks the better total 0.8 + 0.8.
  CHECK(distinct_one_to_one(mat({{0.9f, 0.8f}, {0.8f, 0.1f}}), 0.5) == doctest::Approx(0.9));
}

TEST_CASE("duplicating candidate lines adds at most the pair-term delta") {
  FineParams p;
  const double full = 0.7;
  auto check_guard = [&](const Eigen::MatrixXf& s, std::size_t top_t) {
    p.top_t = top_t;
    Eigen::MatrixXf dup(s.rows(), 2 * s.cols());
    dup << s, s;
    const auto a = fine_terms(s, full, p);
    const auto b = fine_terms(dup, full, p);
    CHECK(b.score - a.score <= p.lambda_mp * (b.many_to_many - a.many_to_many) + 1e-12);
  };
  // Identical lines, and distinct best columns scored with t = 1. Other
  // shapes can gain through RelTopT, since copies of the best entries fill
  // the top-t window.
  check_guard(Eigen::MatrixXf::Identity(3, 3), 3);
  check_guard(mat({{0.9f, 0.1f, 0.0f}, {0.2f, 0.8f, 0.1f}, {0.0f, 0.3f, 0.7f}}), 1);
}

TEST_CASE("coarse score: self, one shared entity, orthogonal") {
  test::Table t;
  t.emplace("a", test::axis(4, 0));
  t.emplace("b", test::axis(4, 1));
  t.emplace("c", test::axis(4, 2));
  t.emplace("d", test::axis(4, 3));
  t.emplace("r", test::axis(4, 0));
  t.emplace("s", test::axis(4, 3));
  Codebook cb(test::table_provider(t, 4, false));
  auto edge = [&](const char* h, const char* r, const char* tl) {
    return cb.intern_edge({cb.intern_entity(h), cb.intern_relation(r), cb.intern_entity(tl)});
  };
  const std::vector<EdgeId> q = {edge("a", "r", "b")}, shares = {edge("b", "s", "c")}, ortho = {edge("c", "s", "d")};
  const CoarseWeights half{0.5f, 0.5f};
  CHECK(coarse_score(cb, q, q, half) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(coarse_score(cb, q, q, CoarseWeights{}) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(coarse_score(cb, q, shares, half) == doctest::Approx(0.5));
  CHECK(coarse_score(cb, shares, q, half) == doctest::Approx(0.5));
  const std::vector<EdgeId> q2 = {edge("a", "r", "a")};
  CHECK(coarse_score(cb, q2, ortho, half) == doctest::Approx(0.0));
  CHECK_THROWS_AS(coarse_score(cb, q, {}, half), Error);
  CHECK_THROWS_AS(CoarseWeights({0.7f, 0.7f}).validate(), Error);
}

TEST_CASE("shortlist order, ties and containment") {
  test::Table t;
  t.emplace("q", test::axis(3, 0));
  t.emplace("r", test::axis(3, 2));
  for (float x : {0.9f, 0.5f, 0.1f}) {
    t.emplace("c" + std::to_string(int(x * 10)), Vector(Eigen::Vector3f(x, std::sqrt(1 - x * x), 0)));
  }
  auto p = test::table_provider(t, 3, false);
  Codebook cb(p);
  auto self_edge = [&](const std::string& e) {
    return cb.intern_edge({cb.intern_entity(e), cb.intern_relation("r"), cb.intern_entity(e)});
  };
  RunStore store;
  std::vector<Run> runs;
  for (const char* name : {"c1", "c9", "c5", "c9"}) {
    Run r{RunId(0u), Channel::kFact, {self_edge(name)}, {}, 1};
    finalize_run(cb, r);
    runs.push_back(r);
  }
  store.append(runs);
  const std::vector<EdgeId> q = {self_edge("q")};
  LineEmbedder lines(p);
  const Retriever ret(cb, store, lines);
  const CoarseWeights w{1.0f, 0.0f};
  std::size_t scanned = 0;
  const auto top2 = ret.shortlist(q, Channel::kFact, 2, w, &scanned);
  REQUIRE(top2.size() == 2);
  CHECK(top2[0].run == RunId(1u));  // tie at 0.9 goes to the lower id
  CHECK(top2[1].run == RunId(3u));
  CHECK(top2[0].coarse == doctest::Approx(0.9));
  CHECK(scanned == 4);
  CHECK(ret.shortlist(q, Channel::kFact, 10, w).size() == 4);
  CHECK(ret.shortlist(q, Channel::kAnswer, 10, w).empty());
  const auto top3 = ret.shortlist(q, Channel::kFact, 3, w);
  CHECK(top3[2].run == RunId(2u));
}

TEST_CASE("retrieve matches the brute-force oracle when k covers the corpus") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto corpus = test::random_corpus(seed, 60);
    const LineEmbedder lines(corpus.provider);
    const Retriever ret(corpus.codebook, corpus.runs, lines);
    RetrievalParams params;
    params.k = corpus.runs.size();
    params.top_m = corpus.runs.size();
    const auto got = ret.retrieve(corpus.query, "", params);
    const auto want = test::brute_force_ranking(corpus, params.fine);
    REQUIRE(got.ranked.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(got.ranked[i].run == want[i].run);
      CHECK(got.ranked[i].fine == doctest::Approx(want[i].fine).epsilon(1e-9));
    }
    CHECK(got.edges_touched_fine <= got.shortlist_bound * got.longest_shortlisted);
    CHECK(got.runs_scanned_coarse == corpus.runs.size());
  }
}

TEST_CASE("retrieve truncates, counts and stays deterministic") {
  const auto corpus = test::random_corpus(9, 80);
  const LineEmbedder lines(corpus.provider);
  const Retriever ret(corpus.codebook, corpus.runs, lines);
  RetrievalParams params;
  params.k = 4;
  params.top_m = 5;
  const auto a = ret.retrieve(corpus.query, "", params);
  const auto b = ret.retrieve(corpus.query, "", params);
  REQUIRE(a.ranked.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.ranked[i].run == b.ranked[i].run);
    CHECK(a.ranked[i].fine == b.ranked[i].fine);
    if (i) CHECK(a.ranked[i - 1].fine >= a.ranked[i].fine);
  }
  CHECK(a.shortlist_bound == 12);
  CHECK(a.edges_touched_fine <= a.shortlist_bound * a.longest_shortlisted);
  params.top_m = 0;
  const auto none = ret.retrieve(corpus.query, "", params);
  CHECK(none.ranked.empty());
  CHECK(none.runs_scanned_coarse == corpus.runs.size());
  CHECK(none.edges_touched_fine > 0);

  for (std::size_t k = 1; k < 10; ++k) {
    const auto small = ret.shortlist(corpus.query, Channel::kFact, k, params.coarse);
    const auto big = ret.shortlist(corpus.query, Channel::kFact, k + 1, params.coarse);
    std::set<RunId> bigger;
    for (const auto& e : big) bigger.insert(e.run);
    for (const auto& e : small) CHECK(bigger.count(e.run) == 1);
  }
}

TEST_CASE("a query without triples falls back to centroid similarity") {
  const auto corpus = test::random_corpus(3, 20);
  const LineEmbedder lines(corpus.provider);
  const Retriever ret(corpus.codebook, corpus.runs, lines);
  RetrievalParams params;
  params.top_m = 3;
  const auto r = ret.retrieve({}, "what do we know about w3", params);
  CHECK(r.fallback);
  REQUIRE(r.ranked.size() == 3);
  const Vector q = corpus.provider->embed_one("what do we know about w3");
  double best = -2;
  for (Channel c : kChannels)
    for (const auto& run : corpus.runs.channel(c)) best = std::max<double>(best, cosine(q, run.centroid));
  CHECK(r.ranked[0].fine == doctest::Approx(best));
  CHECK(ret.retrieve({}, "", params).ranked.empty());
}

TEST_CASE("line embedder caches by text") {
  const auto corpus = test::random_corpus(4, 10);
  const LineEmbedder lines(corpus.provider);
  const auto before = corpus.provider->texts_encoded();
  lines.lines(corpus.codebook, corpus.query);
  const auto first = corpus.provider->texts_encoded() - before;
  lines.lines(corpus.codebook, corpus.query);
  CHECK(corpus.provider->texts_encoded() - before == first);
  CHECK(lines.cached() >= 1);
  CHECK(line_text(corpus.codebook, corpus.query[0]).find(' ') != std::string::npos);
}
