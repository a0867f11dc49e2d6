/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <chrono>
#include <cstdio>

#include "apr/workspace.hpp"
#include "hash.hpp"

namespace apr {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

bool blank(std::string_view line) {
  for (char c : line) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

// Mean pairwise centroid cosine of the runs retrieved for one channel; 0 with
// fewer than two runs.
double redundancy(const RunStore& store, const RetrievalResult& result, Channel c) {
  std::vector<Vector> vecs;
  for (const auto& r : result.ranked) {
    if (r.channel == c) vecs.push_back(store.find(r.run)->centroid);
  }
  if (vecs.size() < 2) return 0.0;
  return mean_pairwise_similarity(stack_rows(vecs, static_cast<int>(vecs.front().size())));
}

}  // namespace

IngestReport& IngestReport::operator+=(const IngestReport& o) {
  spans += o.spans;
  triples += o.triples;
  new_entities += o.new_entities;
  new_relations += o.new_relations;
  new_edges += o.new_edges;
  runs_created += o.runs_created;
  consolidations += o.consolidations;
  return *this;
}

Pipeline::Pipeline(WorkspaceConfig config, std::shared_ptr<const EmbeddingProvider> provider,
                   std::unique_ptr<TripleExtractor> extractor)
    : config_(std::move(config)),
      provider_(std::move(provider)),
      extractor_(std::move(extractor)),
      tokenizer_(make_tokenizer(config_.tokenizer)),
      lines_(provider_),
      codebook_(provider_) {
  if (!extractor_) throw Error(ErrorCode::kInvalidArgument, "pipeline needs an extractor");
}

void Pipeline::restore(Codebook codebook, RunStore runs) {
  codebook_ = std::move(codebook);
  codebook_.set_provider(provider_);
  runs_ = std::move(runs);
}

IngestReport Pipeline::ingest_span(std::string_view text, Channel channel, const std::string& span) {
  IngestReport report;
  report.spans = 1;
  const auto triples = to_triples(extractor_->extract(text));
  report.triples = triples.size();
  if (triples.empty()) return report;

  const auto e0 = codebook_.entity_count(), r0 = codebook_.relation_count(), m0 = codebook_.edge_count();
  const auto seq = codebook_.indexify(triples, channel, span);
  report.new_entities = codebook_.entity_count() - e0;
  report.new_relations = codebook_.relation_count() - r0;
  report.new_edges = codebook_.edge_count() - m0;

  auto runs = refine_boundaries(codebook_, segment(codebook_, seq.edges, channel, config_.segmenter),
                                config_.segmenter);
  report.runs_created = runs.size();
  runs_.append(std::move(runs));
  return report;
}

IngestReport Pipeline::ingest_text(std::string_view text, Channel channel, const std::string& source) {
  IngestReport total;
  std::size_t pos = 0, line = 1, span_line = 0;
  std::string span;
  auto flush = [&] {
    if (span.empty()) return;
    const std::string name = source + ":" + std::to_string(span_line);
    try {
      total += ingest_span(span, channel, name);
    } catch (const RemoteError& e) {
      throw RemoteError(e.status(), name + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), name + ": " + e.what());
    }
    span.clear();
  };
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view l = text.substr(pos, eol - pos);
    if (blank(l)) {
      flush();
    } else {
      if (span.empty()) span_line = line;
      span.append(l).push_back('\n');
    }
    if (eol == text.size()) break;
    pos = eol + 1;
    ++line;
  }
  flush();
  return total;
}

std::vector<AliasGroup> Pipeline::alias_groups() const {
  return build_alias_groups(codebook_, config_.budget.knn_k, config_.budget.tau_e);
}

ConsolidationReport Pipeline::consolidate() {
  const auto map = refine_groups(codebook_, alias_groups(), config_.budget);
  auto quotient = apply_quotient(codebook_, map);
  runs_ = remap_runs(runs_, quotient);
  codebook_ = std::move(quotient.codebook);
  return std::move(quotient.report);
}

QueryAnswer Pipeline::answer_query(std::string_view text, const QueryOptions& options) {
  const auto start = Clock::now();
  QueryAnswer out;
  QueryTrace& trace = out.trace;
  char id[17];
  std::snprintf(id, sizeof id, "%016llx", static_cast<unsigned long long>(detail::fnv1a(text)));
  trace.query_id = id;
  trace.tokenizer = tokenizer_->id();

  auto t = Clock::now();
  const auto triples = to_triples(extractor_->extract(text));
  trace.query_triples = triples.size();

  // Queries intern into a scratch copy unless recording, so symbols they
  // introduce never leak into the workspace.
  std::optional<Codebook> scratch;
  const Codebook* cb = &codebook_;
  std::vector<EdgeId> query;
  if (options.record) {
    query = codebook_.indexify(triples, Channel::kQuestion, "query:" + trace.query_id).edges;
  } else {
    bool known = true;
    for (const auto& tt : triples) {
      const auto h = codebook_.find_entity(normalize_surface(tt.head));
      const auto r = codebook_.find_relation(normalize_surface(tt.relation));
      const auto ta = codebook_.find_entity(normalize_surface(tt.tail));
      const auto e = h && r && ta ? codebook_.find_edge({*h, *r, *ta}) : std::nullopt;
      if (!e) {
        known = false;
        break;
      }
      query.push_back(*e);
    }
    if (!known) {
      scratch = codebook_;
      query = scratch->intern_triples(triples);
      cb = &*scratch;
    }
  }
  trace.timings.extract_ms = ms_since(t);

  t = Clock::now();
  RetrievalParams params = config_.retrieval;
  if (options.top_m) params.top_m = *options.top_m;
  out.retrieval = Retriever(*cb, runs_, lines_).retrieve(query, text, params);
  trace.runs_scanned_coarse = out.retrieval.runs_scanned_coarse;
  trace.edges_touched_fine = out.retrieval.edges_touched_fine;
  trace.runs_retrieved = out.retrieval.ranked.size();
  trace.fallback = out.retrieval.fallback;
  trace.timings.retrieve_ms = ms_since(t);

  t = Clock::now();
  QueryFeatures& x = out.features;
  x.query_tokens = static_cast<double>(tokenizer_->count(text));
  x.triples = static_cast<double>(query.size());
  x.ambiguity = query.empty() ? 0.0 : mean_pairwise_similarity(lines_.lines(*cb, query));
  x.budget = config_.token_budget;
  for (Channel c : kChannels) x.redundancy[static_cast<std::size_t>(c)] = redundancy(runs_, out.retrieval, c);
  x.model = config_.model;

  SelectorConfig selection = config_.selector;
  if (options.selection) {
    selection = *options.selection;
    trace.action_source = "override";
  } else if (policy_) {
    selection = policy_->select_action(x).config(config_.selector);
    trace.action_source = "policy";
  } else {
    trace.action_source = "config";
  }
  trace.actions.actions = selection.actions;
  out.selection = apply_selection(out.retrieval.ranked, runs_, selection);
  trace.runs_selected = out.selection.size();
  trace.timings.select_ms = ms_since(t);

  t = Clock::now();
  out.payload = build_payload(*cb, query, out.selection, runs_);
  out.packed = pack(out.payload, *tokenizer_);
  trace.token_counts = out.packed.counts;
  trace.encoding = out.packed.encoding;
  trace.prompt_tokens = out.packed.tokens();
  trace.timings.pack_ms = ms_since(t);

  if (options.record && !query.empty()) {
    runs_.append(refine_boundaries(codebook_, segment(codebook_, query, Channel::kQuestion, config_.segmenter),
                                   config_.segmenter));
  }
  ++queries_;
  trace.timings.total_ms = ms_since(start);
  return out;
}

}  // namespace apr
