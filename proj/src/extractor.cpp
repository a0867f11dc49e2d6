/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/extractor.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <semaphore>

#include <json.hpp>

#include "apr/codebook.hpp"
#include "apr/error.hpp"
#include "http_endpoint.hpp"

namespace apr {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view strip_punct(std::string_view s) {
  while (!s.empty() && std::string_view(",.;:!?\"'()").find(s.back()) != std::string_view::npos) s.remove_suffix(1);
  while (!s.empty() && std::string_view("\"'(").find(s.front()) != std::string_view::npos) s.remove_prefix(1);
  return s;
}

struct Word {
  std::string_view text;
  std::size_t begin;  // offset within the clause
};

std::vector<Word> split_words(std::string_view s) {
  std::vector<Word> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) words.push_back({s.substr(start, i - start), start});
  }
  return words;
}

std::string join(std::span<const Word> words, char sep) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(sep);
    out += w.text;
  }
  return out;
}

}  // namespace

std::vector<TripleText> to_triples(std::span<const RawTriple> raw) {
  std::vector<TripleText> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(r.text());
  return out;
}

std::vector<RawTriple> TripleExtractor::extract(std::string_view text) const {
  if (text.empty()) throw Error(ErrorCode::kInvalidArgument, "extract() requires non-empty text");
  return do_extract(text);
}

std::vector<std::vector<RawTriple>> TripleExtractor::extract_batch(std::span<const std::string> texts) const {
  std::vector<std::vector<RawTriple>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(extract(t));
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& PatternExtractor::default_lexicon() {
  static const std::vector<std::string> lexicon = {
      "acquired_in", "acquired", "is exposed to", "exposed to", "exposed_to", "is subject to", "are subject to",
      "subject to", "subject_to", "applies to", "owns", "is a", "is part of", "is located in", "located in",
      "founded", "reported", "signed", "supplies", "depends on", "causes", "contains", "includes",
      "is linked to", "leads to", "has"};
  return lexicon;
}

PatternExtractor::PatternExtractor() : PatternExtractor(default_lexicon()) {}

PatternExtractor::PatternExtractor(std::vector<std::string> verb_lexicon) {
  for (const auto& phrase : verb_lexicon) {
    std::vector<std::string> tokens;
    for (const auto& w : split_words(phrase)) tokens.push_back(lower(w.text));
    if (!tokens.empty()) verbs_.push_back(std::move(tokens));
  }
  std::stable_sort(verbs_.begin(), verbs_.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
}

std::vector<RawTriple> PatternExtractor::do_extract(std::string_view text) const {
  std::vector<RawTriple> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view raw_line = text.substr(pos, eol - pos);
    const std::string_view line = trim(raw_line);
    const std::size_t line_begin = pos + static_cast<std::size_t>(line.data() - raw_line.data());

    if (!line.empty() && line.front() != '#') {
      if (line.find('|') != std::string_view::npos) {
        const auto p1 = line.find('|');
        const auto p2 = line.find('|', p1 + 1);
        if (p2 != std::string_view::npos && line.find('|', p2 + 1) == std::string_view::npos) {
          RawTriple t{normalize_surface(line.substr(0, p1)), normalize_surface(line.substr(p1 + 1, p2 - p1 - 1)),
                      normalize_surface(line.substr(p2 + 1)), line_begin, line_begin + line.size()};
          if (!t.head.empty() && !t.relation.empty() && !t.tail.empty()) out.push_back(std::move(t));
        }
      } else {
        clause_triples(text, line_begin, line, out);
      }
    }
    if (eol == text.size()) break;
    pos = eol + 1;
  }
  return out;
}

void PatternExtractor::clause_triples(std::string_view /*text*/, std::size_t line_begin, std::string_view line,
                                      std::vector<RawTriple>& out) const {
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    const bool at_end = i == line.size();
    const bool terminator = !at_end && std::string_view(".;!?").find(line[i]) != std::string_view::npos &&
                            (i + 1 == line.size() || is_space(line[i + 1]));
    if (!at_end && !terminator) continue;

    const std::string_view clause = line.substr(start, i - start);
    const std::size_t clause_begin = line_begin + start;
    start = i + 1;

    const auto words = split_words(clause);
    for (std::size_t w = 1; w < words.size(); ++w) {
      const std::vector<std::string>* match = nullptr;
      for (const auto& verb : verbs_) {
        if (w + verb.size() >= words.size()) continue;
        bool ok = true;
        for (std::size_t k = 0; k < verb.size() && ok; ++k) ok = lower(strip_punct(words[w + k].text)) == verb[k];
        if (ok) {
          match = &verb;
          break;
        }
      }
      if (!match) continue;

      // A leading adverbial ("In 2022, ...") ends at the last comma before the verb.
      std::size_t subj_from = 0;
      for (std::size_t k = 0; k < w; ++k) {
        if (words[k].text.back() == ',') subj_from = k + 1;
      }
      std::span<const Word> subject(words.data() + subj_from, w - subj_from);
      std::span<const Word> object(words.data() + w + match->size(), words.size() - w - match->size());
      std::string head(strip_punct(normalize_surface(join(subject, ' '))));
      std::string tail(strip_punct(normalize_surface(join(object, ' '))));
      std::string rel;
      for (const auto& tok : *match) rel += (rel.empty() ? "" : "_") + tok;
      if (head.empty() || tail.empty()) break;

      const std::size_t begin = clause_begin + (subject.empty() ? words[w].begin : subject.front().begin);
      const std::size_t end = clause_begin + clause.size();
      out.push_back({std::move(head), std::move(rel), std::move(tail), begin, end});
      break;
    }
  }
}

// ---------------------------------------------------------------------------

struct RemoteExtractor::Impl {
  detail::HttpEndpoint endpoint;
  std::string token;
  int timeout_ms;
  int retries;
  mutable std::counting_semaphore<1024> in_flight;

  explicit Impl(const RemoteExtractorConfig& c)
      : endpoint(detail::HttpEndpoint::parse(c.endpoint)),
        timeout_ms(c.timeout_ms),
        retries(std::max(0, c.retries)),
        in_flight(std::clamp(c.max_in_flight, 1, 1024)) {
    if (!c.auth_env.empty()) {
      if (const char* v = std::getenv(c.auth_env.c_str())) token = v;
    }
  }
};

RemoteExtractor::RemoteExtractor(const RemoteExtractorConfig& config) : impl_(std::make_unique<Impl>(config)) {}

RemoteExtractor::~RemoteExtractor() = default;

std::vector<RawTriple> RemoteExtractor::do_extract(std::string_view text) const {
  const nlohmann::json body = {{"text", std::string(text)}};
  impl_->in_flight.acquire();
  std::string response;
  try {
    response = detail::post_json(impl_->endpoint, "/extract", body.dump(), impl_->token, impl_->timeout_ms,
                                 impl_->retries);
  } catch (...) {
    impl_->in_flight.release();
    throw;
  }
  impl_->in_flight.release();

  std::vector<RawTriple> out;
  try {
    const auto doc = nlohmann::json::parse(response);
    for (const auto& t : doc.at("triples")) {
      RawTriple r{normalize_surface(t.at("h").get<std::string>()), normalize_surface(t.at("r").get<std::string>()),
                  normalize_surface(t.at("t").get<std::string>()), 0, text.size()};
      if (r.head.empty() || r.relation.empty() || r.tail.empty()) {
        throw Error(ErrorCode::kNoTriplesFound, "remote extractor returned an empty triple component");
      }
      if (auto at = text.find(r.head); at != std::string_view::npos) r.begin = at;
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kNoTriplesFound, std::string("malformed extractor response: ") + e.what());
  }
  return out;
}

}  // namespace apr
