/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "policy_oracle.hpp"
#include "support.hpp"

using namespace apr;

namespace {

EvalRecord record(std::string id, ActionTuple y, double acc, double tokens) {
  EvalRecord r;
  r.query_id = std::move(id);
  r.action = y;
  r.acc = acc;
  r.tokens = tokens;
  return r;
}

ActionTuple tuple(SelectorAction q, SelectorAction a, SelectorAction f) { return ActionTuple{{q, a, f}}; }

}  // namespace

TEST_CASE("action tuple indexing") {
  for (std::size_t i = 0; i < kActionTuples; ++i) CHECK(ActionTuple::from_index(i).index() == i);
  const auto t = tuple(SelectorAction::kIncludeAll, SelectorAction::kNotInclude, SelectorAction::kUnique);
  CHECK(t.index() == 19);
  CHECK(t.config().action(Channel::kFact) == SelectorAction::kUnique);
  CHECK(ActionTuple::from_index(0).actions[0] == SelectorAction::kNotInclude);
  CHECK_THROWS_AS(ActionTuple::from_index(27), Error);
}

TEST_CASE("utility and preference pairs") {
  const UtilityWeights w{1.0, 0.0, 0.001, 0.0};
  const auto a = record("q", ActionTuple::from_index(26), 0.8, 500);
  const auto b = record("q", ActionTuple::from_index(13), 0.7, 100);
  CHECK(utility(a, w) == doctest::Approx(0.3));
  CHECK(utility(b, w) == doctest::Approx(0.6));
  CHECK(utility(EvalRecord{}, UtilityWeights{}) == 0.0);
  EvalRecord full = a;
  full.faith = 0.5;
  full.latency = 2;
  CHECK(utility(full, UtilityWeights{1, 0.5, 0.001, 0.05}) == doctest::Approx(0.8 + 0.25 - 0.5 - 0.1));

  const std::vector<EvalRecord> two = {a, b};
  const auto pairs = build_preference_pairs(two, w);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].chosen == b.action);
  CHECK(pairs[0].rejected == a.action);

  const std::vector<EvalRecord> ties = {record("t", ActionTuple::from_index(1), 0.5, 0),
                                        record("t", ActionTuple::from_index(2), 0.5, 0)};
  CHECK(build_preference_pairs(ties, w).empty());
  const std::vector<EvalRecord> three = {record("x", ActionTuple::from_index(1), 0.1, 0),
                                         record("y", ActionTuple::from_index(5), 0.9, 0),
                                         record("x", ActionTuple::from_index(2), 0.2, 0),
                                         record("x", ActionTuple::from_index(3), 0.3, 0)};
  const auto p3 = build_preference_pairs(three, w);
  CHECK(p3.size() == 3);
  for (const auto& p : p3) CHECK(p.chosen.index() > p.rejected.index());
  CHECK(build_preference_pairs(std::span(three).subspan(1, 1), w).empty());
}

TEST_CASE("analytic gradient matches finite differences") {
  std::mt19937_64 rng(2);
  for (int probe = 0; probe < 5; ++probe) {
    Policy p({"m0", "m1"});
    std::normal_distribution<double> n(0, 0.3);
    for (Eigen::Index i = 0; i < p.weights().size(); ++i) p.weights().data()[i] = n(rng);
    if (probe % 2) {
      p.freeze_reference();
      for (Eigen::Index i = 0; i < p.weights().size(); ++i) p.weights().data()[i] += n(rng);
    }
    p.beta_dpo = 0.3 + probe * 0.2;
    const auto pairs = test::bradley_terry_pairs(rng, 8, 1.0);
    const auto exact = dpo_gradient(p, pairs);
    const auto numeric = test::numeric_gradient(p, pairs);
    CHECK((exact - numeric).norm() <= 1e-4 * std::max(1.0, numeric.norm()));
  }
}

TEST_CASE("training lowers the loss and prefers the chosen action") {
  Policy p;
  QueryFeatures x;
  x.redundancy = {0.5, 0.5, 0.5};
  const auto good = ActionTuple::from_index(4), bad = ActionTuple::from_index(22);
  const std::vector<PreferencePair> one = {{x, good, bad}};
  const auto before = p.weights();
  CHECK(train(p, {}).losses.empty());
  CHECK(p.weights() == before);
  const auto report = train(p, one, TrainOptions{50, 1.0, 1, 0.0, 40});
  REQUIRE(report.losses.size() == 51);
  for (std::size_t i = 1; i < report.losses.size(); ++i) CHECK(report.losses[i] <= report.losses[i - 1] + 1e-9);
  const auto lp = p.log_probs(x);
  CHECK(lp[Eigen::Index(good.index())] > lp[Eigen::Index(bad.index())]);

  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Policy q;
    const auto pairs = test::bradley_terry_pairs(rng, 300, 2.0);
    const auto r = train(q, pairs, TrainOptions{40, 5.0, seed, 0.5, 40});
    for (std::size_t i = 1; i < r.losses.size(); ++i) CHECK(r.losses[i] <= r.losses[i - 1] + 1e-9);
    CHECK(r.losses.back() < r.losses.front());
  }
}

TEST_CASE("non-finite features surface as errors") {
  Policy p;
  QueryFeatures x;
  x.ambiguity = std::numeric_limits<double>::quiet_NaN();
  const std::vector<PreferencePair> pairs = {{x, ActionTuple::from_index(1), ActionTuple::from_index(2)}};
  CHECK_THROWS_AS(train(p, pairs), Error);
  QueryFeatures ok;
  const std::vector<PreferencePair> fine = {{ok, ActionTuple::from_index(1), ActionTuple::from_index(2)}};
  p.weights()(1, 0) = std::numeric_limits<double>::infinity();
  try {
    train(p, fine);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFiniteLoss);
  }
}

TEST_CASE("Bradley-Terry data is recovered") {
  std::mt19937_64 rng(17);
  const auto pairs = test::bradley_terry_pairs(rng, 2000, 2.0);
  Policy p({"m0"});
  train(p, pairs, TrainOptions{300, 5.0, 1, 0.0, 40});
  CHECK(test::log_odds_alignment(p, rng, 1000) >= 0.85);

  QueryFeatures redundant = test::random_features(rng);
  redundant.redundancy = {0.95, 0.95, 0.95};
  const auto y = p.select_action(redundant);
  for (auto a : y.actions) CHECK(a == SelectorAction::kUnique);
}

TEST_CASE("selection follows the token penalty") {
  Policy flat;
  CHECK(flat.select_action(QueryFeatures{}).index() == 0);

  std::mt19937_64 rng(5);
  Policy p({"m0"});
  train(p, test::bradley_terry_pairs(rng, 500, 2.0), TrainOptions{100, 5.0, 1, 0.0, 40});
  std::vector<QueryFeatures> xs;
  for (int i = 0; i < 50; ++i) xs.push_back(test::random_features(rng));
  double last = std::numeric_limits<double>::infinity();
  for (double eta : {0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0}) {
    p.eta = eta;
    double tokens = 0;
    for (const auto& x : xs) tokens += p.costs[p.select_action(x).index()];
    CHECK(tokens <= last + 1e-12);
    last = tokens;
  }
  p.eta = 1e9;
  for (const auto& x : xs) CHECK(p.select_action(x).index() == 0);
}

TEST_CASE("cost calibration") {
  Policy p;
  CHECK(p.costs == Policy::proxy_costs());
  CHECK(Policy::proxy_costs()[26] == 9.0);
  CHECK(Policy::proxy_costs()[13] == 6.0);
  const std::vector<EvalRecord> recs = {record("a", ActionTuple::from_index(26), 0, 900),
                                        record("b", ActionTuple::from_index(26), 0, 1100)};
  p.calibrate_costs(recs);
  CHECK(p.costs[26] == doctest::Approx(1000));
  CHECK(p.costs[13] == doctest::Approx(6.0 * 1000 / 9.0));
  CHECK(p.costs[0] == 0.0);
}

TEST_CASE("policy persistence and eval logs") {
  test::TempDir dir("policy");
  Policy p({"m0", "m1"});
  p.weights()(3, 2) = 1.5;
  p.freeze_reference();
  p.weights()(4, 1) = -2;
  p.eta = 0.25;
  p.beta_dpo = 0.7;
  p.save(dir.path / "policy.json");
  const auto q = Policy::load(dir.path / "policy.json");
  CHECK(q.weights() == p.weights());
  CHECK(q.models() == p.models());
  CHECK(q.eta == 0.25);
  CHECK(q.beta_dpo == 0.7);
  CHECK(q.has_frozen_reference());
  QueryFeatures x;
  x.model = "m1";
  CHECK(q.reference_log_probs(x).isApprox(p.reference_log_probs(x)));
  std::ofstream(dir.path / "bad.json") << "{}";
  CHECK_THROWS_AS(Policy::load(dir.path / "bad.json"), Error);

  std::istringstream csv(
      "acc,query_id,action_q,action_a,action_f,tokens,faith,latency,red_f,model\n"
      "0.8,q1,unique,include_all,not_include,500,0.9,1.5,0.4,m1\n"
      "0.6,q1,not_include,not_include,not_include,100,0.9,0.5,0.4,m1\n");
  const auto recs = read_eval_csv(csv);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].action == tuple(SelectorAction::kUnique, SelectorAction::kIncludeAll, SelectorAction::kNotInclude));
  CHECK(recs[0].features.redundancy[2] == 0.4);
  CHECK(recs[0].features.model == "m1");
  CHECK(recs[1].tokens == 100);
  std::istringstream missing("query_id,acc\nq,1\n");
  CHECK_THROWS_AS(read_eval_csv(missing), Error);
  std::istringstream range("query_id,action_q,action_a,action_f,acc\nq,unique,unique,unique,1.5\n");
  CHECK_THROWS_AS(read_eval_csv(range), Error);
}
