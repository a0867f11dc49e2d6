/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/policy.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

namespace apr {
namespace {

double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }
double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

Eigen::VectorXd log_softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return z.array() - lse;
}

// Preference margin z = beta * [(l+ - r+) - (l- - r-)].
double margin(const Policy& p, const PreferencePair& pair) {
  const auto lp = p.log_probs(pair.features);
  const auto lr = p.reference_log_probs(pair.features);
  const auto c = pair.chosen.index(), r = pair.rejected.index();
  return p.beta_dpo * ((lp[c] - lr[c]) - (lp[r] - lr[r]));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::size_t ActionTuple::index() const noexcept {
  return 9 * static_cast<std::size_t>(actions[0]) + 3 * static_cast<std::size_t>(actions[1]) +
         static_cast<std::size_t>(actions[2]);
}

ActionTuple ActionTuple::from_index(std::size_t index) {
  if (index >= kActionTuples) throw Error(ErrorCode::kInvalidArgument, "action tuple index out of range");
  return {{static_cast<SelectorAction>(index / 9), static_cast<SelectorAction>(index / 3 % 3),
           static_cast<SelectorAction>(index % 3)}};
}

SelectorConfig ActionTuple::config(SelectorConfig base) const {
  base.actions = actions;
  return base;
}

std::string ActionTuple::to_string() const {
  std::string out;
  for (Channel c : kChannels) {
    if (!out.empty()) out += ',';
    out += std::string(apr::to_string(c)) + "=" + std::string(apr::to_string(actions[static_cast<std::size_t>(c)]));
  }
  return out;
}

double utility(const EvalRecord& r, const UtilityWeights& w) {
  return w.alpha * r.acc + w.delta * r.faith - w.beta * r.tokens - w.gamma * r.latency;
}

std::vector<PreferencePair> build_preference_pairs(std::span<const EvalRecord> records, const UtilityWeights& w) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const EvalRecord*>> groups;
  for (const auto& r : records) {
    auto [it, inserted] = groups.try_emplace(r.query_id);
    if (inserted) order.push_back(r.query_id);
    it->second.push_back(&r);
  }
  std::vector<PreferencePair> pairs;
  for (const auto& id : order) {
    const auto& g = groups.at(id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        const double ui = utility(*g[i], w), uj = utility(*g[j], w);
        if (ui > uj) pairs.push_back({g[i]->features, g[i]->action, g[j]->action});
        if (uj > ui) pairs.push_back({g[j]->features, g[j]->action, g[i]->action});
      }
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------

Policy::Policy(std::vector<std::string> models) : costs(proxy_costs()), models_(std::move(models)) {
  weights_ = Eigen::MatrixXd::Zero(kActionTuples, static_cast<Eigen::Index>(feature_count()));
}

const std::vector<std::string>& Policy::numeric_feature_names() {
  static const std::vector<std::string> names = {"bias",   "log_query_tokens", "log_triples", "ambiguity",
                                                 "log_budget", "red_q", "red_a", "red_f"};
  return names;
}

std::size_t Policy::feature_count() const noexcept { return numeric_feature_names().size() + models_.size(); }

Eigen::VectorXd Policy::features(const QueryFeatures& x) const {
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(feature_count()));
  phi << 1.0, std::log1p(std::max(0.0, x.query_tokens)), std::log1p(std::max(0.0, x.triples)), x.ambiguity,
      std::log1p(std::max(0.0, x.budget)), x.redundancy[0], x.redundancy[1], x.redundancy[2],
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(models_.size()));
  for (std::size_t m = 0; m < models_.size(); ++m) {
    if (models_[m] == x.model) phi[static_cast<Eigen::Index>(numeric_feature_names().size() + m)] = 1.0;
  }
  if (!phi.allFinite()) throw Error(ErrorCode::kInvalidArgument, "non-finite query feature");
  return phi;
}

Eigen::VectorXd Policy::logits(const QueryFeatures& x) const { return weights_ * features(x); }

Eigen::VectorXd Policy::log_probs(const QueryFeatures& x) const { return log_softmax(logits(x)); }

Eigen::VectorXd Policy::reference_log_probs(const QueryFeatures& x) const {
  if (!reference_) return Eigen::VectorXd::Constant(kActionTuples, -std::log(static_cast<double>(kActionTuples)));
  return log_softmax(*reference_ * features(x));
}

ActionTuple Policy::select_action(const QueryFeatures& x) const {
  const Eigen::VectorXd z = logits(x);
  std::size_t best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kActionTuples; ++i) {
    const double v = z[static_cast<Eigen::Index>(i)] - eta * costs[i];
    if (v > best_v || (v == best_v && costs[i] < costs[best])) {
      best = i;
      best_v = v;
    }
  }
  return ActionTuple::from_index(best);
}

std::array<double, kActionTuples> Policy::proxy_costs() {
  std::array<double, kActionTuples> out{};
  constexpr std::array<double, 3> per_action = {0.0, 2.0, 3.0};  // NotInclude, Unique, IncludeAll
  for (std::size_t i = 0; i < kActionTuples; ++i) {
    const auto t = ActionTuple::from_index(i);
    for (auto a : t.actions) out[i] += per_action[static_cast<std::size_t>(a)];
  }
  return out;
}

void Policy::calibrate_costs(std::span<const EvalRecord> records) {
  const auto proxy = proxy_costs();
  std::array<double, kActionTuples> sum{};
  std::array<std::size_t, kActionTuples> n{};
  for (const auto& r : records) {
    sum[r.action.index()] += r.tokens;
    ++n[r.action.index()];
  }
  double tokens = 0, proxies = 0;
  for (std::size_t i = 0; i < kActionTuples; ++i) {
    if (n[i]) {
      tokens += sum[i] / static_cast<double>(n[i]);
      proxies += proxy[i];
    }
  }
  const double scale = proxies > 0 ? tokens / proxies : 1.0;
  for (std::size_t i = 0; i < kActionTuples; ++i) {
    costs[i] = n[i] ? sum[i] / static_cast<double>(n[i]) : proxy[i] * scale;
  }
}

void Policy::save(const std::filesystem::path& path) const {
  auto matrix_json = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(m.cols());
      for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
      rows.push_back(row);
    }
    return rows;
  };
  nlohmann::json doc = {{"v", 1},
                        {"features", numeric_feature_names()},
                        {"models", models_},
                        {"weights", matrix_json(weights_)},
                        {"reference", reference_ ? matrix_json(*reference_) : nlohmann::json("uniform")},
                        {"beta_dpo", beta_dpo},
                        {"eta", eta},
                        {"costs", costs}};
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

Policy Policy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    Policy p(doc.at("models").get<std::vector<std::string>>());
    auto read_matrix = [&](const nlohmann::json& rows) {
      Eigen::MatrixXd m(kActionTuples, static_cast<Eigen::Index>(p.feature_count()));
      if (rows.size() != kActionTuples) throw Error(ErrorCode::kConfig, "policy weights need 27 rows");
      for (std::size_t i = 0; i < kActionTuples; ++i) {
        const auto row = rows[i].get<std::vector<double>>();
        if (row.size() != p.feature_count()) throw Error(ErrorCode::kConfig, "policy weight row has wrong width");
        for (std::size_t j = 0; j < row.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
      }
      return m;
    };
    p.weights_ = read_matrix(doc.at("weights"));
    if (!doc.at("reference").is_string()) p.reference_ = read_matrix(doc.at("reference"));
    p.beta_dpo = doc.at("beta_dpo").get<double>();
    p.eta = doc.at("eta").get<double>();
    p.costs = doc.at("costs").get<std::array<double, kActionTuples>>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, "bad policy file " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

double dpo_loss(const Policy& policy, std::span<const PreferencePair> pairs) {
  if (pairs.empty()) return 0.0;
  double sum = 0;
  for (const auto& pair : pairs) sum -= log_sigmoid(margin(policy, pair));
  return sum / static_cast<double>(pairs.size());
}

Eigen::MatrixXd dpo_gradient(const Policy& policy, std::span<const PreferencePair> pairs) {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(policy.weights().rows(), policy.weights().cols());
  if (pairs.empty()) return grad;
  // d log pi(y)/dW = (e_y - p) phi^T; the p terms cancel between y+ and y-.
  for (const auto& pair : pairs) {
    const double coeff = -sigmoid(-margin(policy, pair)) * policy.beta_dpo;
    const Eigen::VectorXd phi = policy.features(pair.features);
    grad.row(static_cast<Eigen::Index>(pair.chosen.index())) += coeff * phi.transpose();
    grad.row(static_cast<Eigen::Index>(pair.rejected.index())) -= coeff * phi.transpose();
  }
  return grad / static_cast<double>(pairs.size());
}

TrainReport train(Policy& policy, std::span<const PreferencePair> pairs, const TrainOptions& options) {
  TrainReport report;
  if (pairs.empty()) return report;
  if (options.init_scale > 0) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> noise(0.0, options.init_scale);
    for (Eigen::Index i = 0; i < policy.weights().size(); ++i) policy.weights().data()[i] += noise(rng);
  }
  double loss = dpo_loss(policy, pairs);
  if (!std::isfinite(loss)) throw Error(ErrorCode::kNonFiniteLoss, "initial DPO loss is not finite");
  report.losses.push_back(loss);
  double lr = options.learning_rate;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const Eigen::MatrixXd grad = dpo_gradient(policy, pairs);
    if (!grad.allFinite()) throw Error(ErrorCode::kNonFiniteLoss, "DPO gradient is not finite");
    const Eigen::MatrixXd start = policy.weights();
    bool accepted = false;
    for (std::size_t h = 0; h <= options.max_halvings; ++h) {
      policy.weights() = start - lr * grad;
      const double next = dpo_loss(policy, pairs);
      if (std::isfinite(next) && next <= loss + 1e-9) {
        loss = next;
        accepted = true;
        break;
      }
      lr *= 0.5;
      ++report.halvings;
    }
    if (!accepted) {
      policy.weights() = start;
      if (!std::isfinite(loss)) throw Error(ErrorCode::kNonFiniteLoss, "DPO loss diverged");
      break;
    }
    report.losses.push_back(loss);
  }
  return report;
}

double mean_pairwise_similarity(const Matrix& rows) {
  const Eigen::Index n = rows.rows();
  if (n < 2) return 1.0;
  const MatrixX<double> x = rows.cast<double>();
  const MatrixX<double> g = x * x.transpose();
  return (g.sum() - g.trace()) / static_cast<double>(n * (n - 1));
}

std::vector<EvalRecord> read_eval_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kIo, "eval log is empty");
  const auto header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  static const std::vector<std::string> required = {"query_id", "action_q", "action_a", "action_f",
                                                    "acc",      "faith",    "tokens",   "latency"};
  for (const auto& name : required) {
    if (!col.contains(name)) throw Error(ErrorCode::kConfig, "eval log missing column " + name);
  }
  std::vector<EvalRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    auto field = [&](const std::string& name) -> std::optional<std::string> {
      auto it = col.find(name);
      if (it == col.end() || it->second >= f.size()) return std::nullopt;
      return f[it->second];
    };
    auto number = [&](const std::string& name) {
      const auto s = field(name);
      if (!s || s->empty()) return 0.0;
      try {
        return std::stod(*s);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kConfig, "line " + std::to_string(lineno) + ": bad number in " + name);
      }
    };
    EvalRecord r;
    r.query_id = field("query_id").value_or("");
    r.features.query_tokens = number("query_tokens");
    r.features.triples = number("triples");
    r.features.ambiguity = number("ambiguity");
    r.features.budget = number("budget");
    r.features.redundancy = {number("red_q"), number("red_a"), number("red_f")};
    r.features.model = field("model").value_or("");
    const std::array<const char*, 3> action_cols = {"action_q", "action_a", "action_f"};
    for (std::size_t c = 0; c < 3; ++c) {
      const auto a = parse_action(field(action_cols[c]).value_or(""));
      if (!a) throw Error(ErrorCode::kConfig, "line " + std::to_string(lineno) + ": bad action");
      r.action.actions[c] = *a;
    }
    r.acc = number("acc");
    r.faith = number("faith");
    r.tokens = number("tokens");
    r.latency = number("latency");
    if (r.acc < 0 || r.acc > 1 || r.faith < 0 || r.faith > 1 || r.tokens < 0 || r.latency < 0) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(lineno) + ": value out of range");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EvalRecord> read_eval_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return read_eval_csv(in);
}

}  // namespace apr
