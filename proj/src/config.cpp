/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <array>
#include <charconv>
#include <cstdlib>
#include <fstream>

// GCC 11 has floating-point to_chars; use it for shortest round-trip output.
#define TOML_FLOAT_CHARCONV 1
#include <toml.hpp>

#include "apr/workspace.hpp"

namespace apr {
namespace {

namespace fs = std::filesystem;

template <typename T>
void read(const toml::node_view<const toml::node>& node, T& out) {
  if constexpr (std::is_same_v<T, float> || std::is_same_v<T, double>) {
    if (auto v = node.value<double>()) out = static_cast<T>(*v);
  } else if constexpr (std::is_same_v<T, bool> || std::is_same_v<T, std::string>) {
    if (auto v = node.value<T>()) out = *v;
  } else {
    if (auto v = node.value<std::int64_t>()) {
      if (*v < 0) throw Error(ErrorCode::kConfig, "negative value where a count is expected");
      out = static_cast<T>(*v);
    }
  }
}

fs::path resolve(const fs::path& root, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : root / path;
}

std::string_view provider_name(ProviderKind k) {
  switch (k) {
    case ProviderKind::kFixture: return "fixture";
    case ProviderKind::kHashing: return "hashing";
    case ProviderKind::kRemote: return "remote";
  }
  return "hashing";
}

ProviderKind parse_provider(const std::string& s) {
  if (s == "fixture") return ProviderKind::kFixture;
  if (s == "hashing") return ProviderKind::kHashing;
  if (s == "remote") return ProviderKind::kRemote;
  throw Error(ErrorCode::kConfig, "unknown provider kind: " + s);
}

}  // namespace

WorkspaceConfig WorkspaceConfig::load(const fs::path& file, const fs::path& root) {
  toml::table doc;
  try {
    doc = toml::parse_file(file.string());
  } catch (const toml::parse_error& e) {
    throw Error(ErrorCode::kConfig, file.string() + ": " + std::string(e.description()));
  }
  const toml::node_view<const toml::node> t{doc};
  WorkspaceConfig c;
  read(t["seed"], c.seed);
  read(t["tokenizer"], c.tokenizer);

  const auto p = t["provider"];
  std::string kind(provider_name(c.provider.kind));
  read(p["kind"], kind);
  c.provider.kind = parse_provider(kind);
  read(p["dimension"], c.provider.dimension);
  std::string fixture;
  read(p["fixture_path"], fixture);
  c.provider.fixture_path = resolve(root, fixture);
  read(p["fixture_hashing_fallback"], c.provider.fixture_hashing_fallback);
  read(p["endpoint"], c.provider.endpoint);
  read(p["auth_env"], c.provider.auth_env);
  read(p["batch_size"], c.provider.batch_size);
  read(p["timeout_ms"], c.provider.timeout_ms);
  read(p["retries"], c.provider.retries);
  read(p["max_in_flight"], c.provider.max_in_flight);

  const auto x = t["extractor"];
  std::string ext = "pattern";
  read(x["kind"], ext);
  if (ext == "pattern") {
    c.extractor = ExtractorKind::kPattern;
  } else if (ext == "remote") {
    c.extractor = ExtractorKind::kRemote;
  } else {
    throw Error(ErrorCode::kConfig, "unknown extractor kind: " + ext);
  }
  read(x["endpoint"], c.remote_extractor.endpoint);
  read(x["auth_env"], c.remote_extractor.auth_env);
  read(x["timeout_ms"], c.remote_extractor.timeout_ms);
  read(x["retries"], c.remote_extractor.retries);
  read(x["max_in_flight"], c.remote_extractor.max_in_flight);

  const auto s = t["segmenter"];
  read(s["tau"], c.segmenter.tau);
  read(s["bonus"], c.segmenter.bonus);
  read(s["window"], c.segmenter.window);

  const auto r = t["retrieval"];
  auto& rp = c.retrieval;
  read(r["k"], rp.k);
  read(r["top_m"], rp.top_m);
  read(r["w_ent"], rp.coarse.entity);
  read(r["w_rel"], rp.coarse.relation);
  read(r["top_t"], rp.fine.top_t);
  read(r["tau_cov"], rp.fine.tau_cov);
  read(r["tau_pair"], rp.fine.tau_pair);
  read(r["t_pair"], rp.fine.temp_pair);
  read(r["tau_dist"], rp.fine.tau_dist);
  read(r["lambda_cov"], rp.fine.lambda_cov);
  read(r["lambda_mp"], rp.fine.lambda_mp);
  read(r["lambda_1to1"], rp.fine.lambda_1to1);
  read(r["lambda_whole"], rp.fine.lambda_whole);
  std::string mp = "sqrt";
  read(r["mp_norm"], mp);
  if (mp != "sqrt" && mp != "log") throw Error(ErrorCode::kConfig, "mp_norm must be sqrt or log");
  rp.fine.mp_norm = mp == "sqrt" ? MpNorm::kSqrt : MpNorm::kLog;

  const auto sel = t["selector"];
  for (Channel ch : kChannels) {
    std::string a;
    read(sel[to_string(ch)], a);
    if (a.empty()) continue;
    const auto action = parse_action(a);
    if (!action) throw Error(ErrorCode::kConfig, "unknown selector action: " + a);
    c.selector.actions[static_cast<std::size_t>(ch)] = *action;
  }
  read(sel["cluster_threshold"], c.selector.cluster_threshold);

  const auto pol = t["policy"];
  std::string policy_path;
  read(pol["path"], policy_path);
  c.policy_path = resolve(root, policy_path);
  read(pol["model"], c.model);
  read(pol["token_budget"], c.token_budget);

  const auto b = t["consolidation"];
  read(b["max_entities"], c.budget.max_entities);
  read(b["max_workspace_bytes"], c.budget.max_workspace_bytes);
  read(b["knn_k"], c.budget.knn_k);
  read(b["tau_e"], c.budget.tau_e);
  read(b["kmeans_k_fraction"], c.budget.kmeans_k_fraction);
  read(b["kmeans_max_iters"], c.budget.kmeans_max_iters);

  c.provider.seed = c.seed;
  c.budget.seed = c.seed;
  return c;
}

void WorkspaceConfig::save(const fs::path& file) const {
  auto i64 = [](auto v) { return static_cast<std::int64_t>(v); };
  // Shortest decimal form of a float, so 0.93f is written as 0.93.
  auto real = [](float v) {
    std::array<char, 32> buf{};
    const auto end = std::to_chars(buf.data(), buf.data() + buf.size(), v).ptr;
    return std::strtod(std::string(buf.data(), end).c_str(), nullptr);
  };
  toml::table doc{
      {"seed", i64(seed)},
      {"tokenizer", tokenizer},
      {"provider",
       toml::table{{"kind", std::string(provider_name(provider.kind))},
                   {"dimension", i64(provider.dimension)},
                   {"fixture_path", provider.fixture_path.string()},
                   {"fixture_hashing_fallback", provider.fixture_hashing_fallback},
                   {"endpoint", provider.endpoint},
                   {"auth_env", provider.auth_env},
                   {"batch_size", i64(provider.batch_size)},
                   {"timeout_ms", i64(provider.timeout_ms)},
                   {"retries", i64(provider.retries)},
                   {"max_in_flight", i64(provider.max_in_flight)}}},
      {"extractor",
       toml::table{{"kind", extractor == ExtractorKind::kPattern ? "pattern" : "remote"},
                   {"endpoint", remote_extractor.endpoint},
                   {"auth_env", remote_extractor.auth_env},
                   {"timeout_ms", i64(remote_extractor.timeout_ms)},
                   {"retries", i64(remote_extractor.retries)},
                   {"max_in_flight", i64(remote_extractor.max_in_flight)}}},
      {"segmenter", toml::table{{"tau", real(segmenter.tau)}, {"bonus", real(segmenter.bonus)}, {"window", i64(segmenter.window)}}},
      {"retrieval",
       toml::table{{"k", i64(retrieval.k)},
                   {"top_m", i64(retrieval.top_m)},
                   {"w_ent", real(retrieval.coarse.entity)},
                   {"w_rel", real(retrieval.coarse.relation)},
                   {"top_t", i64(retrieval.fine.top_t)},
                   {"tau_cov", real(retrieval.fine.tau_cov)},
                   {"tau_pair", real(retrieval.fine.tau_pair)},
                   {"t_pair", real(retrieval.fine.temp_pair)},
                   {"tau_dist", real(retrieval.fine.tau_dist)},
                   {"lambda_cov", real(retrieval.fine.lambda_cov)},
                   {"lambda_mp", real(retrieval.fine.lambda_mp)},
                   {"lambda_1to1", real(retrieval.fine.lambda_1to1)},
                   {"lambda_whole", real(retrieval.fine.lambda_whole)},
                   {"mp_norm", retrieval.fine.mp_norm == MpNorm::kSqrt ? "sqrt" : "log"}}},
      {"selector",
       toml::table{{"question", std::string(to_string(selector.action(Channel::kQuestion)))},
                   {"answer", std::string(to_string(selector.action(Channel::kAnswer)))},
                   {"fact", std::string(to_string(selector.action(Channel::kFact)))},
                   {"cluster_threshold", real(selector.cluster_threshold)}}},
      {"policy", toml::table{{"path", policy_path.string()}, {"model", model}, {"token_budget", token_budget}}},
      {"consolidation",
       toml::table{{"max_entities", i64(budget.max_entities)},
                   {"max_workspace_bytes", i64(budget.max_workspace_bytes)},
                   {"knn_k", i64(budget.knn_k)},
                   {"tau_e", real(budget.tau_e)},
                   {"kmeans_k_fraction", real(budget.kmeans_k_fraction)},
                   {"kmeans_max_iters", i64(budget.kmeans_max_iters)}}},
  };
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + file.string());
  out << doc << '\n';
}

void WorkspaceConfig::validate() const {
  segmenter.validate();
  retrieval.validate();
  selector.validate();
  budget.validate();
  if (provider.dimension <= 0) throw Error(ErrorCode::kConfig, "provider dimension must be positive");
  if (provider.kind == ProviderKind::kFixture && !fs::exists(provider.fixture_path)) {
    throw Error(ErrorCode::kConfig, "fixture file not found: " + provider.fixture_path.string());
  }
  if ((provider.kind == ProviderKind::kRemote && provider.endpoint.empty()) ||
      (extractor == ExtractorKind::kRemote && remote_extractor.endpoint.empty())) {
    throw Error(ErrorCode::kConfig, "remote adapters need an endpoint");
  }
  if (!policy_path.empty() && !fs::exists(policy_path)) {
    throw Error(ErrorCode::kConfig, "policy file not found: " + policy_path.string());
  }
  make_tokenizer(tokenizer);
}

std::unique_ptr<TripleExtractor> make_extractor(const WorkspaceConfig& config) {
  if (config.extractor == ExtractorKind::kRemote) return std::make_unique<RemoteExtractor>(config.remote_extractor);
  return std::make_unique<PatternExtractor>();
}

}  // namespace apr
