/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/prompt.hpp"

#include <unistd.h>

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace apr {
namespace {

constexpr std::string_view kEdgeMatrixRules =
    "---Knowledge Base---\n"
    "[JSON format]\n"
    "- e: list of entities (e[i] = entity string)\n"
    "- r: list of relations (r[j] = relation string)\n"
    "- edge_matrix: [[head_e_idx, r_idx, tail_e_idx]]\n"
    "    * NOTE: edges[i] is just shorthand for edge_matrix[i]\n"
    "- questions(edges[i]): questions linked by edge i\n"
    "- given knowledge(edges[i]): prior answers linked by edge i\n"
    "- facts(edges[i]): facts linked by edge i";

constexpr std::string_view kIdTripleRules =
    "---Knowledge Base---\n"
    "[JSON format]\n"
    "- e: list of entities (e[i] = entity string)\n"
    "- r: list of relations (r[j] = relation string)\n"
    "- [e,r,e]: triple [head_e_idx, r_idx, tail_e_idx]\n"
    "- questions([[e,r,e], ...]): question triples\n"
    "- given knowledge([[e,r,e], ...]): prior answer triples\n"
    "- facts([[e,r,e], ...]): fact triples";

constexpr std::string_view kWordTripleRules =
    "---Knowledge Base---\n"
    "[JSON format]\n"
    "- questions(words): question triples\n"
    "- given knowledge(words): prior answer triples\n"
    "- facts(words): fact triples";

constexpr std::array<std::string_view, 3> kChannelKeys = {"questions", "given knowledge", "facts"};

constexpr std::array<std::string_view, 3> kKeySuffix = {"(edges[i])", "([[e,r,e], ...])", "(words)"};

std::string json_quoted(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

// Bare words follow the compact figure style; anything that could confuse the
// lenient parser is quoted.
bool bare_safe(std::string_view s) {
  if (s.empty() || s.front() == ' ' || s.back() == ' ') return false;
  for (unsigned char c : s) {
    if (c < 0x20 || c == 0x7f) return false;
    if (std::string_view(",[]{}\":\\").find(static_cast<char>(c)) != std::string_view::npos) return false;
  }
  return true;
}

std::string word(std::string_view s) { return bare_safe(s) ? std::string(s) : json_quoted(s); }

std::string string_list(std::span<const std::string> items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += json_quoted(items[i]);
  }
  return out + "]";
}

std::string triple_list(std::span<const LocalTriple> triples) {
  std::string out = "[";
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (i) out += ',';
    out += '[' + std::to_string(triples[i].head) + ',' + std::to_string(triples[i].relation) + ',' +
           std::to_string(triples[i].tail) + ']';
  }
  return out + "]";
}

// ---------------------------------------------------------------------------
// Lenient JSON-like reader.

struct Value {
  enum class Kind { kScalar, kArray, kObject } kind = Kind::kScalar;
  std::string scalar;
  std::vector<Value> items;
  std::vector<std::pair<std::string, Value>> members;
  std::size_t offset = 0;
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  Value document() {
    skip_ws();
    if (peek() != '{') fail("expected '{'");
    Value v = object();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters after object");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw MalformedPrompt(pos_, what); }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  bool at_end() const { return pos_ >= text_.size(); }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  Value value() {
    skip_ws();
    if (at_end()) fail("unexpected end of input");
    switch (peek()) {
      case '{': return object();
      case '[': return array();
      case '"': {
        Value v;
        v.offset = pos_;
        v.scalar = string();
        return v;
      }
      default: return bare();
    }
  }

  std::string string() {
    const std::size_t start = pos_;
    ++pos_;
    while (!at_end() && text_[pos_] != '"') pos_ += text_[pos_] == '\\' ? 2 : 1;
    if (at_end()) {
      pos_ = start;
      fail("unterminated string");
    }
    ++pos_;
    try {
      return nlohmann::json::parse(text_.substr(start, pos_ - start)).get<std::string>();
    } catch (const nlohmann::json::exception&) {
      pos_ = start;
      fail("invalid string escape");
    }
  }

  Value bare() {
    Value v;
    v.offset = pos_;
    while (!at_end() && std::string_view(",]}\n").find(text_[pos_]) == std::string_view::npos) {
      if (std::string_view("[{\":").find(text_[pos_]) != std::string_view::npos) fail("unexpected character");
      ++pos_;
    }
    std::string_view s = text_.substr(v.offset, pos_ - v.offset);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (s.empty()) fail("expected a value");
    v.scalar = std::string(s);
    return v;
  }

  Value array() {
    Value v;
    v.kind = Value::Kind::kArray;
    v.offset = pos_++;
    skip_ws();
    if (peek() == ']') {
      ++pos_;
      return v;
    }
    while (true) {
      v.items.push_back(value());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() == ']') {
        ++pos_;
        return v;
      }
      fail(at_end() ? "unexpected end of input in array" : "expected ',' or ']'");
    }
  }

  Value object() {
    Value v;
    v.kind = Value::Kind::kObject;
    v.offset = pos_++;
    skip_ws();
    if (peek() == '}') {
      ++pos_;
      return v;
    }
    while (true) {
      skip_ws();
      if (peek() != '"') fail(at_end() ? "unexpected end of input in object" : "expected a quoted key");
      std::string key = string();
      skip_ws();
      if (peek() != ':') fail("expected ':'");
      ++pos_;
      v.members.emplace_back(std::move(key), value());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() == '}') {
        ++pos_;
        return v;
      }
      // A missing comma between members is tolerated.
      if (peek() == '"') continue;
      fail(at_end() ? "unexpected end of input in object" : "expected ',' or '}'");
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string normalize_key(std::string key) {
  while (!key.empty() && (key.back() == ':' || key.back() == ' ')) key.pop_back();
  return key;
}

const Value& expect_array(const Value& v) {
  if (v.kind != Value::Kind::kArray) throw MalformedPrompt(v.offset, "expected an array");
  return v;
}

const std::string& expect_scalar(const Value& v) {
  if (v.kind != Value::Kind::kScalar) throw MalformedPrompt(v.offset, "expected a scalar");
  return v.scalar;
}

std::uint32_t expect_index(const Value& v, std::size_t bound) {
  const std::string& s = expect_scalar(v);
  std::uint32_t out = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || end != s.data() + s.size()) throw MalformedPrompt(v.offset, "expected an index");
  if (out >= bound) throw MalformedPrompt(v.offset, "index out of range");
  return out;
}

std::vector<std::string> read_strings(const Value& v) {
  std::vector<std::string> out;
  for (const auto& item : expect_array(v).items) out.push_back(expect_scalar(item));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<TripleText> PromptPayload::decode(Channel c) const {
  std::vector<TripleText> out;
  for (const auto& t : channel(c)) out.push_back({entities.at(t.head), relations.at(t.relation), entities.at(t.tail)});
  return out;
}

std::size_t PromptPayload::triple_count() const noexcept {
  return channels[0].size() + channels[1].size() + channels[2].size();
}

void PromptPayload::validate() const {
  for (const auto& list : channels) {
    for (const auto& t : list) {
      if (t.head >= entities.size() || t.tail >= entities.size() || t.relation >= relations.size()) {
        throw Error(ErrorCode::kDanglingId, "payload triple index out of range");
      }
    }
  }
}

std::string_view to_string(Encoding e) noexcept {
  switch (e) {
    case Encoding::kEdgeMatrix: return "edge_matrix";
    case Encoding::kIdTriples: return "id_triples";
    case Encoding::kWordTriples: return "word_triples";
  }
  return "?";
}

std::optional<Encoding> parse_encoding(std::string_view s) noexcept {
  for (Encoding e : kEncodings) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

std::string_view rules_text(Encoding e) noexcept {
  switch (e) {
    case Encoding::kEdgeMatrix: return kEdgeMatrixRules;
    case Encoding::kIdTriples: return kIdTripleRules;
    case Encoding::kWordTriples: return kWordTripleRules;
  }
  return {};
}

PromptPayload build_payload(const Codebook& codebook, const std::array<std::vector<EdgeId>, 3>& channel_edges) {
  std::array<std::vector<EdgeId>, 3> unique;
  std::set<EntityId> ents;
  std::set<RelationId> rels;
  for (std::size_t c = 0; c < 3; ++c) {
    std::unordered_set<EdgeId> seen;
    for (EdgeId id : channel_edges[c]) {
      if (!seen.insert(id).second) continue;
      const Edge& e = codebook.edge(id);
      unique[c].push_back(id);
      ents.insert(e.head);
      ents.insert(e.tail);
      rels.insert(e.relation);
    }
  }
  PromptPayload p;
  std::unordered_map<EntityId, std::uint32_t> ent_pos;
  std::unordered_map<RelationId, std::uint32_t> rel_pos;
  for (EntityId e : ents) {
    ent_pos.emplace(e, static_cast<std::uint32_t>(p.entities.size()));
    p.entities.push_back(codebook.entity(e));
  }
  for (RelationId r : rels) {
    rel_pos.emplace(r, static_cast<std::uint32_t>(p.relations.size()));
    p.relations.push_back(codebook.relation(r));
  }
  for (std::size_t c = 0; c < 3; ++c) {
    for (EdgeId id : unique[c]) {
      const Edge& e = codebook.edge(id);
      p.channels[c].push_back({ent_pos.at(e.head), rel_pos.at(e.relation), ent_pos.at(e.tail)});
    }
  }
  return p;
}

PromptPayload build_payload(const Codebook& codebook, std::span<const EdgeId> query, const Selection& selection,
                            const RunStore& runs) {
  std::array<std::vector<EdgeId>, 3> edges;
  edges[0].assign(query.begin(), query.end());
  for (std::size_t c = 0; c < 3; ++c) {
    for (const auto& ranked : selection.channels[c]) {
      const Run* run = runs.find(ranked.run);
      if (!run) throw Error(ErrorCode::kDanglingId, "selected run " + std::to_string(ranked.run.value));
      edges[c].insert(edges[c].end(), run->edges.begin(), run->edges.end());
    }
  }
  return build_payload(codebook, edges);
}

std::string render(const PromptPayload& payload, Encoding encoding) {
  payload.validate();
  const auto suffix = kKeySuffix[static_cast<std::size_t>(encoding)];
  std::string out = "{\n";
  if (encoding != Encoding::kWordTriples) {
    out += "\"e\": " + string_list(payload.entities) + ",\n";
    out += "\"r\": " + string_list(payload.relations) + ",\n";
  }
  if (encoding == Encoding::kEdgeMatrix) {
    std::vector<LocalTriple> matrix;
    std::map<LocalTriple, std::size_t> row;
    std::array<std::vector<std::size_t>, 3> refs;
    for (std::size_t c = 0; c < 3; ++c) {
      for (const auto& t : payload.channels[c]) {
        auto [it, inserted] = row.emplace(t, matrix.size());
        if (inserted) matrix.push_back(t);
        refs[c].push_back(it->second);
      }
    }
    out += "\"edge_matrix\": " + triple_list(matrix) + ",\n";
    for (std::size_t c = 0; c < 3; ++c) {
      out += '"' + std::string(kChannelKeys[c]) + std::string(suffix) + "\": [";
      for (std::size_t i = 0; i < refs[c].size(); ++i) out += (i ? "," : "") + std::to_string(refs[c][i]);
      out += "],\n";
    }
  } else {
    for (std::size_t c = 0; c < 3; ++c) {
      out += '"' + std::string(kChannelKeys[c]) + std::string(suffix) + "\": ";
      if (encoding == Encoding::kIdTriples) {
        out += triple_list(payload.channels[c]);
      } else {
        out += '[';
        for (std::size_t i = 0; i < payload.channels[c].size(); ++i) {
          const auto& t = payload.channels[c][i];
          out += (i ? ",[" : "[") + word(payload.entities[t.head]) + ',' + word(payload.relations[t.relation]) + ',' +
                 word(payload.entities[t.tail]) + ']';
        }
        out += ']';
      }
      out += ",\n";
    }
  }
  out += "\"rules\": " + json_quoted(rules_text(encoding)) + "\n}";
  return out;
}

ParsedPrompt parse_prompt(std::string_view text) {
  const Value doc = Reader(text).document();

  std::optional<Encoding> encoding;
  const Value* e = nullptr;
  const Value* r = nullptr;
  const Value* matrix = nullptr;
  std::array<const Value*, 3> channel{};
  for (const auto& [raw_key, v] : doc.members) {
    const std::string key = normalize_key(raw_key);
    if (key == "e") {
      e = &v;
    } else if (key == "r") {
      r = &v;
    } else if (key == "edge_matrix") {
      matrix = &v;
      encoding = Encoding::kEdgeMatrix;
    } else if (key != "rules") {
      for (std::size_t c = 0; c < 3; ++c) {
        if (!key.starts_with(kChannelKeys[c])) continue;
        const std::string_view rest = std::string_view(key).substr(kChannelKeys[c].size());
        for (Encoding enc : kEncodings) {
          if (rest != kKeySuffix[static_cast<std::size_t>(enc)]) continue;
          if (encoding && *encoding != enc) throw MalformedPrompt(v.offset, "keys from different schemas");
          encoding = enc;
          channel[c] = &v;
        }
      }
    }
  }
  if (!encoding) throw MalformedPrompt(doc.offset, "no recognizable knowledge-base keys");

  ParsedPrompt out;
  out.encoding = *encoding;
  PromptPayload& p = out.payload;
  if (*encoding == Encoding::kWordTriples) {
    std::unordered_map<std::string, std::uint32_t> ent, rel;
    auto intern = [](auto& map, auto& list, const std::string& s) {
      auto [it, inserted] = map.emplace(s, static_cast<std::uint32_t>(list.size()));
      if (inserted) list.push_back(s);
      return it->second;
    };
    for (std::size_t c = 0; c < 3; ++c) {
      if (!channel[c]) continue;
      for (const auto& t : expect_array(*channel[c]).items) {
        if (expect_array(t).items.size() != 3) throw MalformedPrompt(t.offset, "triple needs three words");
        const auto h = intern(ent, p.entities, expect_scalar(t.items[0]));
        const auto rr = intern(rel, p.relations, expect_scalar(t.items[1]));
        const auto tt = intern(ent, p.entities, expect_scalar(t.items[2]));
        p.channels[c].push_back({h, rr, tt});
      }
    }
    return out;
  }

  if (!e || !r) throw MalformedPrompt(doc.offset, "missing \"e\" or \"r\"");
  p.entities = read_strings(*e);
  p.relations = read_strings(*r);
  auto read_triple = [&](const Value& t) {
    if (expect_array(t).items.size() != 3) throw MalformedPrompt(t.offset, "triple needs three indices");
    return LocalTriple{expect_index(t.items[0], p.entities.size()), expect_index(t.items[1], p.relations.size()),
                       expect_index(t.items[2], p.entities.size())};
  };
  if (*encoding == Encoding::kIdTriples) {
    for (std::size_t c = 0; c < 3; ++c) {
      if (!channel[c]) continue;
      for (const auto& t : expect_array(*channel[c]).items) p.channels[c].push_back(read_triple(t));
    }
    return out;
  }
  if (!matrix) throw MalformedPrompt(doc.offset, "missing \"edge_matrix\"");
  std::vector<LocalTriple> rows;
  for (const auto& t : expect_array(*matrix).items) rows.push_back(read_triple(t));
  for (std::size_t c = 0; c < 3; ++c) {
    if (!channel[c]) continue;
    for (const auto& ref : expect_array(*channel[c]).items) p.channels[c].push_back(rows[expect_index(ref, rows.size())]);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t DefaultTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool word = std::isalnum(c) || c == '_' || c >= 0x80;
    if (word) {
      if (!in_word) ++n;
      in_word = true;
      continue;
    }
    in_word = false;
    if (!std::isspace(c)) ++n;
  }
  return n;
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c);
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

std::size_t CommandTokenizer::count(std::string_view text) const {
  char path[] = "/tmp/apr-tokens-XXXXXX";
  const int fd = mkstemp(path);
  if (fd < 0) throw Error(ErrorCode::kIo, "cannot create temporary file for tokenizer");
  std::size_t written = 0;
  while (written < text.size()) {
    const auto w = ::write(fd, text.data() + written, text.size() - written);
    if (w <= 0) break;
    written += static_cast<std::size_t>(w);
  }
  ::close(fd);
  const std::string cmd = command_ + " < " + path;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  std::string output;
  if (pipe) {
    char buf[256];
    while (std::fgets(buf, sizeof buf, pipe)) output += buf;
  }
  const int status = pipe ? ::pclose(pipe) : -1;
  ::unlink(path);
  if (written != text.size() || status != 0) throw Error(ErrorCode::kIo, "tokenizer command failed: " + command_);
  std::size_t n = 0;
  const char* b = output.data();
  while (b < output.data() + output.size() && std::isspace(static_cast<unsigned char>(*b))) ++b;
  const auto [end, ec] = std::from_chars(b, output.data() + output.size(), n);
  if (ec != std::errc() || end == b) throw Error(ErrorCode::kIo, "tokenizer command printed no count");
  return n;
}

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view id) {
  if (id.empty() || id == "default") return std::make_unique<DefaultTokenizer>();
  if (id == "whitespace") return std::make_unique<WhitespaceTokenizer>();
  if (id.starts_with("cmd:")) return std::make_unique<CommandTokenizer>(std::string(id.substr(4)));
  throw Error(ErrorCode::kConfig, "unknown tokenizer: " + std::string(id));
}

TokenCount count_tokens(std::string_view text, const Tokenizer& tokenizer) {
  return {tokenizer.count(text), tokenizer.id()};
}

TokenCount count_tokens(std::string_view text) { return count_tokens(text, DefaultTokenizer{}); }

PackResult pack(const PromptPayload& payload, const Tokenizer& tokenizer) {
  PackResult best;
  best.tokenizer = tokenizer.id();
  bool first = true;
  for (Encoding enc : kEncodings) {
    std::string text = render(payload, enc);
    const std::size_t n = tokenizer.count(text);
    best.counts[static_cast<std::size_t>(enc)] = n;
    if (first || n < best.tokens()) {
      best.encoding = enc;
      best.text = std::move(text);
      first = false;
    }
  }
  return best;
}

PackResult pack(const PromptPayload& payload) { return pack(payload, DefaultTokenizer{}); }

}  // namespace apr
