/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <doctest.h>

#include <algorithm>
#include <set>

#include "apr/extractor.hpp"
#include "apr/prompt.hpp"
#include "support.hpp"

using namespace apr;

namespace {

constexpr auto kQ = static_cast<std::size_t>(Channel::kQuestion);
constexpr auto kA = static_cast<std::size_t>(Channel::kAnswer);
constexpr auto kF = static_cast<std::size_t>(Channel::kFact);

Codebook example_codebook() {
  Codebook cb(std::make_shared<HashingProvider>(16, 1));
  const auto raw = PatternExtractor().extract(test::read_file(test::fixture("example1_triples.txt")));
  const auto triples = to_triples(raw);
  cb.intern_triples(triples);
  return cb;
}

EdgeId edge(Codebook& cb, const TripleText& t) {
  return cb.intern_edge({cb.intern_entity(t.head), cb.intern_relation(t.relation), cb.intern_entity(t.tail)});
}

PromptPayload figure_payload() {
  Codebook cb = example_codebook();
  std::array<std::vector<EdgeId>, 3> ch;
  ch[kQ] = {edge(cb, {"AlphaCorp", "acquired_in", "2021+"}), edge(cb, {"BetaLtd", "exposed_to", "EUReg2024_12"})};
  ch[kF] = {edge(cb, {"AlphaCorp", "acquired_in", "2021+"}), edge(cb, {"AlphaCorp", "subject_to", "EUReg2024_12"})};
  return build_payload(cb, ch);
}

bool contains(const std::string& s, std::string_view part) { return s.find(part) != std::string::npos; }

std::multiset<TripleText> multiset(const std::vector<TripleText>& v) { return {v.begin(), v.end()}; }

const std::vector<std::string> kSurfaces = {
    "AlphaCorp", "2021+",  "a b",     "say \"hi\"", "x,y",   "[br]",  "back\\slash", "Zürich",
    "null",      "123",    "-4.5e2",  "k: v",       "{obj}", "tab\tin", "e",         "questions(words)",
    "it's",      "naïve",  "#hash",   "acquired_in"};

PromptPayload random_payload(std::mt19937_64& rng) {
  Codebook cb(std::make_shared<HashingProvider>(16, 1));
  std::array<std::vector<EdgeId>, 3> ch;
  const std::size_t pool = 2 + rng() % 10;
  auto pick = [&] { return kSurfaces[rng() % std::min(pool, kSurfaces.size())]; };
  for (auto& list : ch) {
    const std::size_t n = rng() % 6;
    for (std::size_t i = 0; i < n; ++i) list.push_back(edge(cb, {pick(), pick(), pick()}));
  }
  return build_payload(cb, ch);
}

void check_minimal(const PromptPayload& p) {
  std::set<std::uint32_t> ents, rels;
  for (const auto& list : p.channels)
    for (const auto& t : list) {
      ents.insert(t.head);
      ents.insert(t.tail);
      rels.insert(t.relation);
    }
  CHECK(ents.size() == p.entities.size());
  CHECK(rels.size() == p.relations.size());
  CHECK(std::set<std::string>(p.entities.begin(), p.entities.end()).size() == p.entities.size());
}

}  // namespace

TEST_CASE("figure payload renders the three encodings") {
  const auto p = figure_payload();
  CHECK(p.entities == std::vector<std::string>{"AlphaCorp", "BetaLtd", "EUReg2024_12", "2021+"});
  CHECK(p.relations == std::vector<std::string>{"acquired_in", "exposed_to", "subject_to"});
  check_minimal(p);

  const auto m = render(p, Encoding::kEdgeMatrix);
  CHECK(contains(m, R"x("e": ["AlphaCorp","BetaLtd","EUReg2024_12","2021+"])x"));
  CHECK(contains(m, R"x("r": ["acquired_in","exposed_to","subject_to"])x"));
  CHECK(contains(m, R"x("edge_matrix": [[0,0,3],[1,1,2],[0,2,2]])x"));
  CHECK(contains(m, R"x("questions(edges[i])": [0,1])x"));
  CHECK(contains(m, R"x("facts(edges[i])": [0,2])x"));
  CHECK(contains(m, R"x("given knowledge(edges[i])": [])x"));
  CHECK(contains(m, "edge_matrix: [[head_e_idx, r_idx, tail_e_idx]]"));

  const auto ids = render(p, Encoding::kIdTriples);
  CHECK(contains(ids, R"x("questions([[e,r,e], ...])": [[0,0,3],[1,1,2]])x"));
  CHECK(contains(ids, R"x("facts([[e,r,e], ...])": [[0,0,3],[0,2,2]])x"));

  const auto words = render(p, Encoding::kWordTriples);
  CHECK(contains(words, R"x("questions(words)": [[AlphaCorp,acquired_in,2021+],[BetaLtd,exposed_to,EUReg2024_12]])x"));
  CHECK(contains(words, R"x("facts(words)": [[AlphaCorp,acquired_in,2021+],[AlphaCorp,subject_to,EUReg2024_12]])x"));
  CHECK_FALSE(contains(words, "\"e\":"));

  for (Encoding e : kEncodings) {
    const auto back = parse_prompt(render(p, e));
    CHECK(back.encoding == e);
    for (Channel c : kChannels) CHECK(back.payload.decode(c) == p.decode(c));
  }
}

TEST_CASE("hand-written figure prompts parse") {
  // Layouts as a person would type them: keys with a trailing colon, a
  // missing comma and line breaks inside lists.
  const std::string matrix = R"x({
"e": ["AlphaCorp","BetaLtd",
"EUReg2024_12","2021+"],
"r": ["acquired_in","exposed_to",
"subject_to"],
"edge_matrix": [[0,0,3],
[1,1,2],
[0,2,2]],
"questions(edges[i])":[0,1],
"facts(edges[i])": [0,2]
"rules":"schema"
})x";
  const std::string triples = R"x({
"e": ["AlphaCorp","BetaLtd",
"EUReg2024_12","2021+"],
"r": ["acquired_in","exposed_to",
"subject_to"],
"questions([[e,r,e], ...]):": [[0,0,3], [1,1,2]],
"facts([[e,r,e], ...]):": [[0,0,3], [0,2,2]],
"rules":"schema"
})x";
  const std::string words = R"x({
"questions(words)": [[AlphaCorp,acquired_in,2021+],
[BetaLtd,exposed_to,EUReg2024_12]],
"facts(words)": [[AlphaCorp,acquired_in,2021+],
[AlphaCorp,subject_to,EUReg2024_12]],
"rules":"schema"
})x";
  const auto p = figure_payload();
  const std::array<std::pair<std::string, Encoding>, 3> cases = {
      std::pair{matrix, Encoding::kEdgeMatrix}, std::pair{triples, Encoding::kIdTriples},
      std::pair{words, Encoding::kWordTriples}};
  for (const auto& [text, enc] : cases) {
    const auto back = parse_prompt(text);
    CHECK(back.encoding == enc);
    CHECK(back.payload.decode(Channel::kQuestion) == p.decode(Channel::kQuestion));
    CHECK(back.payload.decode(Channel::kFact) == p.decode(Channel::kFact));
    CHECK(back.payload.channel(Channel::kAnswer).empty());
  }
}

TEST_CASE("random payloads round trip through every encoding") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_payload(rng);
    check_minimal(p);
    std::array<std::string, 3> texts;
    for (Encoding e : kEncodings) texts[static_cast<std::size_t>(e)] = render(p, e);
    for (Encoding e : kEncodings) {
      const auto back = parse_prompt(texts[static_cast<std::size_t>(e)]);
      CHECK(back.encoding == e);
      for (Channel c : kChannels) CHECK(back.payload.decode(c) == p.decode(c));
      // Cross-parse: re-render in every other encoding.
      for (Encoding other : kEncodings) {
        const auto again = parse_prompt(render(back.payload, other)).payload;
        for (Channel c : kChannels) CHECK(multiset(again.decode(c)) == multiset(p.decode(c)));
      }
      if (e != Encoding::kWordTriples) {
        CHECK(back.payload.entities == p.entities);
        CHECK(render(back.payload, e) == texts[static_cast<std::size_t>(e)]);
      }
    }
  }
}

TEST_CASE("malformed prompts report an offset") {
  const auto text = render(figure_payload(), Encoding::kEdgeMatrix);
  for (std::size_t cut : {std::size_t(0), std::size_t(1), text.size() / 2, text.size() - 1}) {
    try {
      parse_prompt(text.substr(0, cut));
      FAIL("expected MalformedPrompt at cut " << cut);
    } catch (const MalformedPrompt& e) {
      CHECK(e.offset() <= cut);
    }
  }
  CHECK_THROWS_AS(parse_prompt(R"x({"e": ["a"], "r": ["b"], "edge_matrix": [[0,0,1]], "facts(edges[i])": [0]})x"),
                  Error);
  CHECK_THROWS_AS(parse_prompt(R"x({"e": ["a"], "r": ["b"], "edge_matrix": [[0,0,0]], "facts(edges[i])": [3]})x"),
                  Error);
  CHECK_THROWS_AS(parse_prompt(R"x({"rules": "x"})x"), Error);
}

TEST_CASE("default tokenizer counts") {
  CHECK(count_tokens("a b c").count == 3);
  CHECK(count_tokens("[[0,0,3]]").count == 9);
  CHECK(count_tokens("").count == 0);
  CHECK(count_tokens("").tokenizer == "default");
  CHECK(count_tokens("EUReg2024_12").count == 1);
  CHECK(count_tokens("\"2021+\"").count == 4);
  const DefaultTokenizer t;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto a = kSurfaces[rng() % kSurfaces.size()], b = kSurfaces[rng() % kSurfaces.size()];
    CHECK(t.count(a + b) <= t.count(a) + t.count(b));
    CHECK(t.count(a + " " + b) == t.count(a) + t.count(b));
  }
}

TEST_CASE("other tokenizers") {
  CHECK(make_tokenizer("whitespace")->count("  a  b\tc\n") == 3);
  CHECK(make_tokenizer("default")->id() == "default");
  const auto cmd = make_tokenizer("cmd:wc -c");
  CHECK(cmd->count("hello") == 5);
  CHECK(cmd->id() == "cmd:wc -c");
  CHECK_THROWS_AS(make_tokenizer("bpe"), Error);
  CHECK_THROWS_AS(make_tokenizer("cmd:echo nope")->count("x"), Error);
}

TEST_CASE("pack picks the cheapest rendering") {
  const DefaultTokenizer tok;
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_payload(rng);
    const auto r = pack(p, tok);
    std::array<std::size_t, 3> counts{};
    for (Encoding e : kEncodings) counts[static_cast<std::size_t>(e)] = tok.count(render(p, e));
    CHECK(r.counts == counts);
    const auto best = std::min_element(counts.begin(), counts.end()) - counts.begin();
    CHECK(static_cast<std::ptrdiff_t>(r.encoding) == best);
    CHECK(r.text == render(p, r.encoding));
    CHECK(r.tokens() == counts[best]);
  }
  // Same counts everywhere: a tokenizer that sees every prompt as one token.
  struct Flat final : Tokenizer {
    std::size_t count(std::string_view) const override { return 1; }
    std::string id() const override { return "flat"; }
  };
  CHECK(pack(figure_payload(), Flat{}).encoding == Encoding::kEdgeMatrix);
}

TEST_CASE("symbol reuse favors indices and one long triple favors words") {
  Codebook cb(std::make_shared<HashingProvider>(16, 1));
  std::array<std::vector<EdgeId>, 3> ch;
  // Every symbol reused well over four times. The ID encodings carry a longer
  // schema header, which the payload must be large enough to amortize.
  const std::vector<std::string> ents = {"International Business Machines Corp Armonk", "Acme Holdings Group Plc London",
                                         "European Data Protection Board Brussels"};
  const std::vector<std::string> rels = {"acquired_by", "reports_to", "audits"};
  for (std::size_t h = 0; h < 3; ++h)
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t t = 0; t < 3; ++t) ch[(h + r + t) % 3].push_back(edge(cb, {ents[h], rels[r], ents[t]}));
  const auto reuse = build_payload(cb, ch);
  const auto r = pack(reuse);
  INFO(r.counts[0], " ", r.counts[1], " ", r.counts[2], " triples ", reuse.triple_count());
  CHECK(r.encoding != Encoding::kWordTriples);
  CHECK(r.tokens() < r.counts[static_cast<std::size_t>(Encoding::kWordTriples)]);

  Codebook one(std::make_shared<HashingProvider>(16, 1));
  std::array<std::vector<EdgeId>, 3> single;
  single[kF] = {edge(one, {"a very long entity surface used once", "has some long relation",
                           "another long tail surface"})};
  CHECK(pack(build_payload(one, single)).encoding == Encoding::kWordTriples);
}

TEST_CASE("payload construction edge cases") {
  Codebook cb(std::make_shared<HashingProvider>(16, 1));
  const auto empty = build_payload(cb, std::array<std::vector<EdgeId>, 3>{});
  CHECK(empty.entities.empty());
  CHECK(empty.triple_count() == 0);
  for (Encoding e : kEncodings) {
    const auto text = render(empty, e);
    CHECK(contains(text, "\"rules\""));
    CHECK(parse_prompt(text).payload.triple_count() == 0);
  }

  std::array<std::vector<EdgeId>, 3> loop;
  const auto self = edge(cb, {"x", "r", "x"});
  loop[kA] = {self, self};
  const auto p = build_payload(cb, loop);
  CHECK(p.entities.size() == 1);
  CHECK(p.relations.size() == 1);
  CHECK(p.channel(Channel::kAnswer).size() == 1);

  std::array<std::vector<EdgeId>, 3> bad;
  bad[kQ] = {EdgeId(42u)};
  CHECK_THROWS_AS(build_payload(cb, bad), Error);
  PromptPayload broken = p;
  broken.channels[kF].push_back({0, 0, 5});
  CHECK_THROWS_AS(broken.validate(), Error);
  CHECK(kA == 1);
}
