/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "apr/codebook.hpp"
#include "apr/run_store.hpp"
#include "apr/selector.hpp"

namespace apr {

/// Triple of positional indices into a payload's E' and R'.
struct LocalTriple {
  std::uint32_t head = 0;
  std::uint32_t relation = 0;
  std::uint32_t tail = 0;
  friend auto operator<=>(const LocalTriple&, const LocalTriple&) = default;
};

/// Minimal symbolic state handed to the model: the used entities and
/// relations plus per-channel triple lists over local indices.
struct PromptPayload {
  std::vector<std::string> entities;
  std::vector<std::string> relations;
  std::array<std::vector<LocalTriple>, 3> channels;  // question, answer, fact

  const std::vector<LocalTriple>& channel(Channel c) const { return channels[static_cast<std::size_t>(c)]; }
  std::vector<TripleText> decode(Channel c) const;
  std::size_t triple_count() const noexcept;
  /// Throws DanglingId on an out-of-range index.
  void validate() const;
};

enum class Encoding : std::uint8_t { kEdgeMatrix = 0, kIdTriples = 1, kWordTriples = 2 };

inline constexpr std::array<Encoding, 3> kEncodings = {Encoding::kEdgeMatrix, Encoding::kIdTriples,
                                                       Encoding::kWordTriples};

std::string_view to_string(Encoding e) noexcept;
std::optional<Encoding> parse_encoding(std::string_view s) noexcept;

/// Knowledge-base schema text placed in the "rules" field.
std::string_view rules_text(Encoding e) noexcept;

/// Builds the payload from per-channel edge lists. Each channel keeps its
/// edges once, in order of first appearance. E' and R' hold exactly the used
/// symbols, ordered by their codebook id.
PromptPayload build_payload(const Codebook& codebook, const std::array<std::vector<EdgeId>, 3>& channel_edges);

/// Question channel = query edges followed by selected prior-question runs.
PromptPayload build_payload(const Codebook& codebook, std::span<const EdgeId> query, const Selection& selection,
                            const RunStore& runs);

std::string render(const PromptPayload& payload, Encoding encoding);

struct ParsedPrompt {
  PromptPayload payload;
  Encoding encoding = Encoding::kEdgeMatrix;
};

/// Accepts any rendering, bare or quoted words, keys with or without a
/// trailing colon and a missing comma between object members.
ParsedPrompt parse_prompt(std::string_view text);

/// Token counter. Implementations must be deterministic.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::size_t count(std::string_view text) const = 0;
  virtual std::string id() const = 0;
};

/// Word runs ([A-Za-z0-9_] and non-ASCII bytes) are one token each; every
/// other non-space character is its own token.
class DefaultTokenizer final : public Tokenizer {
 public:
  std::size_t count(std::string_view text) const override;
  std::string id() const override { return "default"; }
};

class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::size_t count(std::string_view text) const override;
  std::string id() const override { return "whitespace"; }
};

/// Runs `command` with the text on stdin and reads an integer from stdout.
class CommandTokenizer final : public Tokenizer {
 public:
  explicit CommandTokenizer(std::string command) : command_(std::move(command)) {}
  std::size_t count(std::string_view text) const override;
  std::string id() const override { return "cmd:" + command_; }

 private:
  std::string command_;
};

/// "default", "whitespace" or "cmd:<shell command>".
std::unique_ptr<Tokenizer> make_tokenizer(std::string_view id);

struct TokenCount {
  std::size_t count = 0;
  std::string tokenizer;
};

TokenCount count_tokens(std::string_view text, const Tokenizer& tokenizer);
TokenCount count_tokens(std::string_view text);

struct PackResult {
  std::string text;
  Encoding encoding = Encoding::kEdgeMatrix;
  std::array<std::size_t, 3> counts{};  // indexed by Encoding
  std::string tokenizer;

  std::size_t tokens() const { return counts[static_cast<std::size_t>(encoding)]; }
};

/// Renders all three encodings and keeps the cheapest; ties prefer the
/// edge matrix, then id triples.
PackResult pack(const PromptPayload& payload, const Tokenizer& tokenizer);
PackResult pack(const PromptPayload& payload);

}  // namespace apr
