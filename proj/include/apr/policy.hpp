/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apr/selector.hpp"

namespace apr {

/// Query features x. Redundancy is per channel (question, answer, fact).
struct QueryFeatures {
  double query_tokens = 0;
  double triples = 0;
  double ambiguity = 0;  // mean pairwise cosine of query lines
  double budget = 0;     // token budget
  std::array<double, 3> redundancy{};
  std::string model;
};

inline constexpr std::size_t kActionTuples = 27;

/// One selector action per channel. index() = 9*q + 3*a + f with
/// NotInclude=0, Unique=1, IncludeAll=2.
struct ActionTuple {
  std::array<SelectorAction, 3> actions{};

  std::size_t index() const noexcept;
  static ActionTuple from_index(std::size_t index);
  SelectorConfig config(SelectorConfig base = {}) const;
  std::string to_string() const;
  friend bool operator==(const ActionTuple&, const ActionTuple&) = default;
};

struct EvalRecord {
  std::string query_id;
  QueryFeatures features;
  ActionTuple action;
  double acc = 0;
  double faith = 0;
  double tokens = 0;
  double latency = 0;  // seconds
};

struct UtilityWeights {
  double alpha = 1.0;   // accuracy
  double delta = 0.5;   // faithfulness
  double beta = 5e-4;   // per token
  double gamma = 0.05;  // per second
};

/// alpha*acc + delta*faith - beta*tokens - gamma*latency.
double utility(const EvalRecord& record, const UtilityWeights& w);

struct PreferencePair {
  QueryFeatures features;
  ActionTuple chosen;
  ActionTuple rejected;
};

/// Groups records by query id (first-appearance order) and emits every
/// pair i < j with strictly different utility, better action first.
std::vector<PreferencePair> build_preference_pairs(std::span<const EvalRecord> records, const UtilityWeights& w);

/// Softmax-linear categorical policy over the 27 action tuples.
class Policy {
 public:
  /// `models` is the registry behind the one-hot model block.
  explicit Policy(std::vector<std::string> models = {});

  static const std::vector<std::string>& numeric_feature_names();
  std::size_t feature_count() const noexcept;
  Eigen::VectorXd features(const QueryFeatures& x) const;

  Eigen::VectorXd logits(const QueryFeatures& x) const;
  Eigen::VectorXd log_probs(const QueryFeatures& x) const;
  Eigen::VectorXd reference_log_probs(const QueryFeatures& x) const;

  /// argmax of logit(y) - eta * cost(y); ties prefer the cheaper tuple,
  /// then the lattice-lower index.
  ActionTuple select_action(const QueryFeatures& x) const;

  /// Freezes the current weights as the reference policy.
  void freeze_reference() { reference_ = weights_; }
  void uniform_reference() { reference_.reset(); }
  bool has_frozen_reference() const noexcept { return reference_.has_value(); }

  Eigen::MatrixXd& weights() noexcept { return weights_; }
  const Eigen::MatrixXd& weights() const noexcept { return weights_; }
  const std::vector<std::string>& models() const noexcept { return models_; }

  double beta_dpo = 0.5;
  double eta = 0.0;
  std::array<double, kActionTuples> costs{};

  /// Per-tuple mean tokens from records; tuples without records get the
  /// lattice proxy (3/2/0 per channel) scaled to the observed token level.
  void calibrate_costs(std::span<const EvalRecord> records);
  static std::array<double, kActionTuples> proxy_costs();

  void save(const std::filesystem::path& path) const;
  static Policy load(const std::filesystem::path& path);

 private:
  std::vector<std::string> models_;
  Eigen::MatrixXd weights_;
  std::optional<Eigen::MatrixXd> reference_;
};

/// Mean DPO loss over pairs.
double dpo_loss(const Policy& policy, std::span<const PreferencePair> pairs);
/// Analytic gradient of dpo_loss with respect to the weights.
Eigen::MatrixXd dpo_gradient(const Policy& policy, std::span<const PreferencePair> pairs);

struct TrainOptions {
  std::size_t epochs = 200;
  double learning_rate = 1.0;
  std::uint64_t seed = 1;
  double init_scale = 0.0;  // seeded N(0, init_scale) added to the start weights
  std::size_t max_halvings = 40;
};

struct TrainReport {
  std::vector<double> losses;  // loss before training, then after each epoch
  std::size_t halvings = 0;
};

/// Full-batch gradient descent; a step that raises the loss by more than
/// 1e-9 is retried at half the rate. Throws NonFiniteLoss.
TrainReport train(Policy& policy, std::span<const PreferencePair> pairs, const TrainOptions& options = {});

/// Mean pairwise cosine of unit rows; 1 for fewer than two rows.
double mean_pairwise_similarity(const Matrix& unit_rows);

/// Reads an eval log. Header: query_id, query_tokens, triples, ambiguity,
/// budget, red_q, red_a, red_f, model, action_q, action_a, action_f, acc,
/// faith, tokens, latency (any column order).
std::vector<EvalRecord> read_eval_csv(std::istream& in);
std::vector<EvalRecord> read_eval_csv(const std::filesystem::path& path);

}  // namespace apr
