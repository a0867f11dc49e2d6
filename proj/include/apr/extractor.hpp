/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apr/types.hpp"

namespace apr {

struct RawTriple {
  std::string head;
  std::string relation;
  std::string tail;
  std::size_t begin = 0;  // char span [begin, end) in the source text
  std::size_t end = 0;

  TripleText text() const { return {head, relation, tail}; }
};

std::vector<TripleText> to_triples(std::span<const RawTriple> raw);

class TripleExtractor {
 public:
  virtual ~TripleExtractor() = default;

  /// Triples in textual order. Throws InvalidArgument on empty text.
  std::vector<RawTriple> extract(std::string_view text) const;
  std::vector<std::vector<RawTriple>> extract_batch(std::span<const std::string> texts) const;

 protected:
  virtual std::vector<RawTriple> do_extract(std::string_view text) const = 0;
};

/// Parses `H | R | T` lines (`#` starts a comment line) and, for other
/// lines, `<subject> <verb phrase> <object>` clauses split on a verb lexicon.
class PatternExtractor final : public TripleExtractor {
 public:
  PatternExtractor();
  explicit PatternExtractor(std::vector<std::string> verb_lexicon);

  static const std::vector<std::string>& default_lexicon();

 protected:
  std::vector<RawTriple> do_extract(std::string_view text) const override;

 private:
  void clause_triples(std::string_view text, std::size_t line_begin, std::string_view line,
                      std::vector<RawTriple>& out) const;

  // Tokenized lexicon, longest phrases first.
  std::vector<std::vector<std::string>> verbs_;
};

struct RemoteExtractorConfig {
  std::string endpoint;
  std::string auth_env;
  int timeout_ms = 30000;
  int retries = 2;
  int max_in_flight = 4;
};

/// POST {endpoint}/extract {"text": ...} -> {"triples":[{"h":..,"r":..,"t":..}]}.
class RemoteExtractor final : public TripleExtractor {
 public:
  explicit RemoteExtractor(const RemoteExtractorConfig& config);
  ~RemoteExtractor() override;

 protected:
  std::vector<RawTriple> do_extract(std::string_view text) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace apr
