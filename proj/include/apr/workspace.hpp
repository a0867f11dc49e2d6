/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apr/codebook.hpp"
#include "apr/consolidator.hpp"
#include "apr/embedding.hpp"
#include "apr/extractor.hpp"
#include "apr/policy.hpp"
#include "apr/prompt.hpp"
#include "apr/retrieval.hpp"
#include "apr/run_store.hpp"
#include "apr/segmenter.hpp"
#include "apr/selector.hpp"

namespace apr {

enum class ExtractorKind { kPattern, kRemote };

struct WorkspaceConfig {
  std::uint64_t seed = 7;  // feeds the provider and k-means
  std::string tokenizer = "default";
  ProviderConfig provider;
  ExtractorKind extractor = ExtractorKind::kPattern;
  RemoteExtractorConfig remote_extractor;
  SegmenterParams segmenter;
  RetrievalParams retrieval;
  SelectorConfig selector;
  std::filesystem::path policy_path;  // empty: use the static selector config
  std::string model = "default";
  double token_budget = 2000;
  ConsolidationBudget budget;

  /// Reads apr.toml; relative paths resolve against `root`. Missing keys keep
  /// their defaults.
  static WorkspaceConfig load(const std::filesystem::path& file, const std::filesystem::path& root);
  void save(const std::filesystem::path& file) const;
  /// Checks parameter ranges and that referenced files exist.
  void validate() const;
};

std::unique_ptr<TripleExtractor> make_extractor(const WorkspaceConfig& config);

struct IngestReport {
  std::size_t spans = 0;
  std::size_t triples = 0;
  std::size_t new_entities = 0;
  std::size_t new_relations = 0;
  std::size_t new_edges = 0;
  std::size_t runs_created = 0;
  std::size_t consolidations = 0;

  IngestReport& operator+=(const IngestReport& o);
};

struct QueryOptions {
  std::optional<SelectorConfig> selection;  // overrides policy and config
  std::optional<std::size_t> top_m;
  /// Adds the query sequence and its runs to the question channel after
  /// retrieval. Off by default so queries leave the workspace untouched.
  bool record = false;
};

struct StageTimings {
  double extract_ms = 0;
  double retrieve_ms = 0;
  double select_ms = 0;
  double pack_ms = 0;
  double total_ms = 0;
};

struct QueryTrace {
  std::string query_id;
  StageTimings timings;
  std::size_t query_triples = 0;
  std::size_t runs_scanned_coarse = 0;
  std::size_t edges_touched_fine = 0;
  std::size_t runs_retrieved = 0;
  std::size_t runs_selected = 0;
  bool fallback = false;
  std::array<std::size_t, 3> token_counts{};  // by Encoding
  Encoding encoding = Encoding::kEdgeMatrix;
  std::size_t prompt_tokens = 0;
  std::string tokenizer;
  ActionTuple actions;
  std::string action_source;  // "override", "policy" or "config"
};

struct QueryAnswer {
  PackResult packed;
  PromptPayload payload;
  RetrievalResult retrieval;
  Selection selection;
  QueryFeatures features;
  QueryTrace trace;
};

/// In-memory pipeline: ingest, retrieve, select, pack and consolidate over
/// one codebook and run store.
class Pipeline {
 public:
  Pipeline(WorkspaceConfig config, std::shared_ptr<const EmbeddingProvider> provider,
           std::unique_ptr<TripleExtractor> extractor);

  /// Extracts, indexifies and segments one span.
  IngestReport ingest_span(std::string_view text, Channel channel, const std::string& span);
  /// Splits text into blank-line separated spans named `source:line`.
  IngestReport ingest_text(std::string_view text, Channel channel, const std::string& source);

  /// Layer-1 alias groups over the current entity table.
  std::vector<AliasGroup> alias_groups() const;
  /// Layer 1 + Layer 2 + quotient remap of codebook and runs.
  ConsolidationReport consolidate();

  QueryAnswer answer_query(std::string_view text, const QueryOptions& options = {});

  const WorkspaceConfig& config() const noexcept { return config_; }
  WorkspaceConfig& config() noexcept { return config_; }
  const Codebook& codebook() const noexcept { return codebook_; }
  const RunStore& runs() const noexcept { return runs_; }
  const Tokenizer& tokenizer() const noexcept { return *tokenizer_; }
  const EmbeddingProvider& provider() const noexcept { return *provider_; }
  const LineEmbedder& line_embedder() const noexcept { return lines_; }

  void set_policy(std::optional<Policy> policy) { policy_ = std::move(policy); }
  const std::optional<Policy>& policy() const noexcept { return policy_; }

  /// Replaces state wholesale (used when loading a workspace).
  void restore(Codebook codebook, RunStore runs);

 private:
  WorkspaceConfig config_;
  std::shared_ptr<const EmbeddingProvider> provider_;
  std::unique_ptr<TripleExtractor> extractor_;
  std::unique_ptr<Tokenizer> tokenizer_;
  LineEmbedder lines_;
  Codebook codebook_;
  RunStore runs_;
  std::optional<Policy> policy_;
  std::uint64_t queries_ = 0;
};

enum class LockMode { kShared, kExclusive };

struct EfficiencySummary {
  std::size_t queries = 0;
  double mean_tokens = 0;
  double median_tokens = 0;
  double mean_latency_ms = 0;
  double median_latency_ms = 0;
  std::map<std::string, std::size_t> encodings;
  struct Growth {
    std::string ts;
    std::string event;
    std::size_t entities = 0;
    std::size_t relations = 0;
    std::size_t edges = 0;
  };
  std::vector<Growth> growth;
};

/// Summarizes traces.jsonl and history.jsonl content (one JSON object per line).
EfficiencySummary report_efficiency(std::span<const std::string> trace_lines,
                                    std::span<const std::string> history_lines);

/// On-disk workspace: apr.toml, codebook and run snapshots, traces,
/// history and consolidation reports, guarded by an flock on .apr.lock.
class Workspace {
 public:
  static constexpr std::string_view kConfigFile = "apr.toml";

  /// Creates the layout. Refuses an existing workspace unless `force`.
  static void init(const std::filesystem::path& root, const WorkspaceConfig& config = {}, bool force = false);
  static Workspace open(const std::filesystem::path& root, LockMode mode);

  Workspace(Workspace&&) noexcept;
  Workspace& operator=(Workspace&&) noexcept;
  ~Workspace();

  IngestReport ingest(std::span<const std::filesystem::path> files, Channel channel);
  QueryAnswer query(std::string_view text, const QueryOptions& options = {});
  ConsolidationReport consolidate(bool force);
  /// Writes the codebook and run snapshots.
  void save();

  std::uint64_t bytes() const;
  EfficiencySummary report() const;

  Pipeline& pipeline() noexcept { return *pipeline_; }
  const Pipeline& pipeline() const noexcept { return *pipeline_; }
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  Workspace(std::filesystem::path root, LockMode mode);
  void require_writer() const;
  void append_history(std::string_view event) const;
  void load_state();

  std::filesystem::path root_;
  LockMode mode_;
  int lock_fd_ = -1;
  std::unique_ptr<Pipeline> pipeline_;
};

/// Binary row table: "APRV", u32 rows, u32 dim, u32 reserved, then floats.
void write_vectors(const std::filesystem::path& path, std::span<const Vector> rows, int dim);
std::vector<Vector> read_vectors(const std::filesystem::path& path, int* dim = nullptr);

}  // namespace apr
