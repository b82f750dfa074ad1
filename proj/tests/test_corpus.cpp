// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "zsid/corpus.hpp"
#include "zsid/errors.hpp"

using namespace zsid;

namespace {

std::filesystem::path fixture(const char* name) {
  const char* dir = std::getenv("ZSID_FIXTURES");
  return std::filesystem::path(dir ? dir : "tests/fixtures") / name;
}

std::vector<Utterance> make_corpus(const LabelSet& labels, const std::vector<std::size_t>& counts) {
  std::vector<Utterance> out;
  for (std::size_t k = 0; k < labels.size(); ++k)
    for (std::size_t i = 0; i < counts[k]; ++i)
      out.push_back({labels.name(k) + "#" + std::to_string(i), {"w" + std::to_string(i)}, labels.name(k)});
  return out;
}

std::set<std::string> ids(const std::vector<Utterance>& us) {
  std::set<std::string> s;
  for (const auto& u : us) s.insert(u.id);
  return s;
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("Book a table") == std::vector<std::string>{"book", "a", "table"});
  CHECK(tokenize("AddToPlaylist") == std::vector<std::string>{"add", "to", "playlist"});
  CHECK(tokenize("BookRestaurant") == std::vector<std::string>{"book", "restaurant"});
  CHECK(tokenize("book_flight") == std::vector<std::string>{"book", "flight"});
  CHECK(tokenize("XMLFile, please!") == std::vector<std::string>{"xml", "file", "please"});
  CHECK(tokenize("play track 42") == std::vector<std::string>{"play", "track", "42"});
  CHECK_THROWS_AS(tokenize(""), DataError);
  CHECK_THROWS_AS(tokenize("?!... ,"), DataError);
}

TEST_CASE("load corpus fixture") {
  const Corpus c = load_corpus(fixture("tiny_dataset.jsonl"), fixture("tiny_labels.json"));
  CHECK(c.utterances.size() == 5);
  CHECK(c.meta.labels.seen_count() == 2);
  CHECK(c.meta.labels.unseen_count() == 1);
  CHECK(c.meta.labels.index("RateBook") == 2);
  CHECK(c.utterances[0].tokens == std::vector<std::string>{"book", "a", "table", "for", "two"});
  CHECK(c.utterances[4].id == "r1");
  CHECK(c.meta.name_tokens(0) == std::vector<std::string>{"book", "restaurant"});
  CHECK(c.meta.name_tokens(2) == std::vector<std::string>{"rate", "book", "stars"});
}

TEST_CASE("corpus errors") {
  const LabelSet labels({"A"}, {"B"});
  try {
    parse_dataset(R"({"text": "hello", "label": "Z", "id": "u9"})", labels);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("u9") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_dataset("\n\n", labels), DataError);
  CHECK_THROWS_AS(parse_dataset(R"({"text": 3})", labels), DataError);
  CHECK_THROWS_AS(LabelSet({"A", "B"}, {"B"}), DataError);
  CHECK_THROWS_AS(parse_label_metadata(R"({"seen": ["A"]})"), DataError);
  CHECK_THROWS_AS(parse_label_metadata(R"({"seen": ["A"], "unseen": [], "keyword_overrides": {"Q": "x"}})"), DataError);
}

TEST_CASE("benchmark corpora sizes (data-gated)") {
  const char* snips = std::getenv("ZSID_SNIPS_DIR");
  const char* clinc = std::getenv("ZSID_CLINC_DIR");
  if (!snips && !clinc) {
    MESSAGE("ZSID_SNIPS_DIR / ZSID_CLINC_DIR not set; skipping real-corpus checks");
    return;
  }
  if (snips) {
    const auto dir = std::filesystem::path(snips);
    const Corpus c = load_corpus(dir / "dataset.jsonl", dir / "labels.json");
    CHECK(c.utterances.size() == 13802);
    CHECK(c.meta.labels.seen_count() == 5);
    CHECK(c.meta.labels.unseen_count() == 2);
  }
  if (clinc) {
    const auto dir = std::filesystem::path(clinc);
    const Corpus c = load_corpus(dir / "dataset.jsonl", dir / "labels.json");
    CHECK(c.utterances.size() == 9000);
    CHECK(c.meta.labels.seen_count() == 50);
    CHECK(c.meta.labels.unseen_count() == 10);
  }
}

TEST_CASE("embeddings") {
  const EmbeddingTable t = load_embeddings(fixture("tiny_embeddings.txt"));
  CHECK(t.size() == 2);
  CHECK(t.dim() == 3);
  CHECK(t.lookup("book") == std::vector<double>{0.5, -1.0, 2.0});
  CHECK(t.lookup("unknown") == std::vector<double>{0.0, 0.0, 0.0});

  const EmbeddingTable h = parse_embeddings("2 3\na 1 2 3\nb 4 5 6\na 7 8 9\n", OovPolicy::hashed_uniform, 7);
  CHECK(h.size() == 2);
  CHECK(h.lookup("a") == std::vector<double>{1, 2, 3});  // first occurrence kept
  const auto v1 = h.lookup("zzz");
  CHECK(v1 == h.lookup("zzz"));
  CHECK(v1 != std::vector<double>(3, 0.0));
  CHECK(v1 != h.lookup("yyy"));

  try {
    parse_embeddings("a 1 2 3\nb 1 2\n");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  const Tensor m = t.embed(std::vector<std::string>{"restaurant", "nope"});
  CHECK(m.shape() == Shape{2, 3});
  CHECK(m.at(0, 2) == 1.5);
  CHECK(m.at(1, 0) == 0.0);
}

TEST_CASE("gzsid split") {
  const LabelSet labels({"S"}, {"U"});
  const auto corpus = make_corpus(labels, {100, 100});
  const Split s = make_split(corpus, labels, {SplitMode::gzsid, 0.7, 1});
  std::size_t seen_train = 0, seen_test = 0, unseen_test = 0, unseen_train = 0;
  for (const auto& u : s.train) (u.label == "S" ? seen_train : unseen_train)++;
  for (const auto& u : s.test) (u.label == "S" ? seen_test : unseen_test)++;
  CHECK(seen_train == 70);
  CHECK(seen_test == 30);
  CHECK(unseen_train == 0);
  CHECK(unseen_test == 30);

  CHECK_THROWS_AS(make_split(make_corpus(labels, {1, 5}), labels, {SplitMode::gzsid, 0.7, 1}), DataError);
  CHECK_THROWS_AS(make_split(corpus, labels, {SplitMode::gzsid, 1.0, 1}), ConfigError);
}

TEST_CASE("zsid split holds only unseen labels in test") {
  const LabelSet labels({"S1", "S2"}, {"U1", "U2"});
  const auto corpus = make_corpus(labels, {5, 6, 7, 8});
  const Split s = make_split(corpus, labels, {SplitMode::zsid, 0.7, 3});
  CHECK(s.train.size() == 11);
  CHECK(s.test.size() == 15);
  for (const auto& u : s.test) CHECK(!labels.is_seen(labels.index(u.label)));
  for (const auto& u : s.train) CHECK(labels.is_seen(labels.index(u.label)));
}

TEST_CASE("split invariants over random class sizes") {
  const LabelSet labels({"a", "b", "c"}, {"x", "y"});
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    std::vector<std::size_t> counts;
    for (std::size_t k = 0; k < 5; ++k) counts.push_back(2 + (seed * 7 + k * 13) % 41);
    const auto corpus = make_corpus(labels, counts);
    const Split a = make_split(corpus, labels, {SplitMode::gzsid, 0.7, seed});
    const Split b = make_split(corpus, labels, {SplitMode::gzsid, 0.7, seed});
    CHECK(ids(a.train) == ids(b.train));
    CHECK(ids(a.test) == ids(b.test));
    std::set<std::string> both;
    const auto tr = ids(a.train), te = ids(a.test);
    std::set_intersection(tr.begin(), tr.end(), te.begin(), te.end(), std::inserter(both, both.begin()));
    CHECK(both.empty());
    for (std::size_t k = 0; k < 3; ++k) {
      const auto n_train = std::count_if(a.train.begin(), a.train.end(), [&](auto& u) { return u.label == labels.name(k); });
      const auto n_test = std::count_if(a.test.begin(), a.test.end(), [&](auto& u) { return u.label == labels.name(k); });
      CHECK(static_cast<std::size_t>(n_train) == counts[k] * 7 / 10);
      CHECK(static_cast<std::size_t>(n_train + n_test) == counts[k]);
    }
  }
}

TEST_CASE("label pseudo-utterance augmentation") {
  LabelMetadata meta{LabelSet({"s1", "s2", "s3", "s4", "s5"}, {"PlayMusic", "RateBook"}), {}};
  auto train = make_corpus(meta.labels, {200, 200, 200, 200, 200, 0, 0});
  auto aug = augment_label_pseudo_utterances(train, meta);
  CHECK(aug.size() == 1400);
  std::size_t pm = 0;
  for (const auto& u : aug) {
    if (u.label == "PlayMusic") {
      ++pm;
      CHECK(u.origin == Origin::label_pseudo);
      CHECK(u.tokens == std::vector<std::string>{"play", "music"});
    }
  }
  CHECK(pm == 200);
  CHECK(std::equal(train.begin(), train.end(), aug.begin(), [](auto& a, auto& b) { return a.id == b.id; }));

  LabelMetadata none{LabelSet({"a", "b"}, {}), {}};
  const auto plain = make_corpus(none.labels, {3, 4});
  CHECK(augment_label_pseudo_utterances(plain, none).size() == 7);

  LabelMetadata one{LabelSet({"a"}, {"BookFlight"}), {}};
  CHECK(augment_label_pseudo_utterances(make_corpus(one.labels, {10, 0}), one).size() == 20);

  // Pseudo-utterances never reach a test split.
  const Split s = make_split(aug, meta.labels, {SplitMode::gzsid, 0.7, 4});
  for (const auto& u : s.test) CHECK(u.origin == Origin::real);
}
