// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "zsid/errors.hpp"
#include "zsid/hash.hpp"

namespace zsid {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_upper(unsigned char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(unsigned char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
// Bytes >= 0x80 belong to multi-byte UTF-8 sequences and stay inside words.
bool is_word(unsigned char c) { return is_upper(c) || is_lower(c) || is_digit(c) || c >= 0x80; }

}  // namespace

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

LabelSet::LabelSet(std::vector<std::string> seen, std::vector<std::string> unseen)
    : seen_(std::move(seen)), unseen_(std::move(unseen)) {
  std::set<std::string> names;
  for (const auto& n : seen_) {
    if (n.empty()) throw DataError("empty label name");
    if (!names.insert(n).second) throw DataError("duplicate label " + n);
  }
  for (const auto& n : unseen_) {
    if (n.empty()) throw DataError("empty label name");
    if (!names.insert(n).second) throw DataError("label " + n + " is listed twice (seen and unseen must be disjoint)");
  }
}

std::optional<std::size_t> LabelSet::find(std::string_view label) const {
  for (std::size_t i = 0; i < seen_.size(); ++i)
    if (seen_[i] == label) return i;
  for (std::size_t j = 0; j < unseen_.size(); ++j)
    if (unseen_[j] == label) return seen_.size() + j;
  return std::nullopt;
}

std::size_t LabelSet::index(std::string_view label) const {
  if (auto k = find(label)) return *k;
  throw DataError("unknown label " + std::string(label));
}

const std::string& LabelSet::name(std::size_t k) const {
  if (k < seen_.size()) return seen_[k];
  return unseen_.at(k - seen_.size());
}

std::vector<std::string> LabelSet::all() const {
  std::vector<std::string> out = seen_;
  out.insert(out.end(), unseen_.begin(), unseen_.end());
  return out;
}

std::vector<std::string> LabelMetadata::name_tokens(std::size_t k) const {
  const std::string& name = labels.name(k);
  if (auto it = keyword_overrides.find(name); it != keyword_overrides.end()) return tokenize(it->second);
  return tokenize(name);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (!is_word(c)) {
      flush();
      continue;
    }
    if (!cur.empty() && is_upper(c)) {
      const auto prev = static_cast<unsigned char>(text[i - 1]);
      const bool next_lower = i + 1 < text.size() && is_lower(static_cast<unsigned char>(text[i + 1]));
      // "bookRestaurant" and "XMLFile" both split before the capital.
      if (is_lower(prev) || is_digit(prev) || (is_upper(prev) && next_lower)) flush();
    }
    cur.push_back(is_upper(c) ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
  }
  flush();
  if (tokens.empty()) throw DataError("no tokens in text \"" + std::string(text) + "\"");
  return tokens;
}

LabelMetadata parse_label_metadata(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("label metadata: ") + e.what());
  }
  if (!j.is_object() || !j.contains("seen") || !j.contains("unseen")) {
    throw DataError("label metadata needs \"seen\" and \"unseen\" arrays");
  }
  LabelMetadata meta;
  try {
    meta.labels = LabelSet(j.at("seen").get<std::vector<std::string>>(), j.at("unseen").get<std::vector<std::string>>());
    if (j.contains("keyword_overrides")) {
      meta.keyword_overrides = j.at("keyword_overrides").get<std::map<std::string, std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("label metadata: ") + e.what());
  }
  if (meta.labels.seen_count() == 0) throw DataError("label metadata lists no seen intents");
  for (const auto& [name, keywords] : meta.keyword_overrides) {
    if (!meta.labels.find(name)) throw DataError("keyword override for unknown label " + name);
    tokenize(keywords);
  }
  return meta;
}

LabelMetadata load_label_metadata(const std::filesystem::path& path) { return parse_label_metadata(read_file(path)); }

std::vector<Utterance> parse_dataset(std::string_view jsonl, const LabelSet& labels) {
  std::vector<Utterance> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    const std::size_t end = std::min(jsonl.find('\n', pos), jsonl.size());
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == jsonl.size()) break;
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j.contains("label") || !j["text"].is_string() ||
        !j["label"].is_string()) {
      throw DataError("dataset line " + std::to_string(line_no) + ": expected {\"text\": ..., \"label\": ...}");
    }
    Utterance u;
    if (j.contains("id")) {
      u.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    } else {
      u.id = "L" + std::to_string(line_no);
    }
    u.label = j["label"].get<std::string>();
    if (!labels.find(u.label)) throw DataError("utterance " + u.id + " has unknown label " + u.label);
    try {
      u.tokens = tokenize(j["text"].get<std::string>());
    } catch (const DataError& e) {
      throw DataError("utterance " + u.id + ": " + e.what());
    }
    out.push_back(std::move(u));
    if (end == jsonl.size()) break;
  }
  if (out.empty()) throw DataError("empty corpus");
  return out;
}

Corpus load_corpus(const std::filesystem::path& dataset, const std::filesystem::path& labels) {
  Corpus c;
  c.meta = load_label_metadata(labels);
  c.utterances = parse_dataset(read_file(dataset), c.meta.labels);
  return c;
}

std::string_view to_string(OovPolicy policy) { return policy == OovPolicy::zeros ? "zeros" : "hashed-uniform"; }

OovPolicy oov_policy_from_string(std::string_view s) {
  if (s == "zeros") return OovPolicy::zeros;
  if (s == "hashed-uniform") return OovPolicy::hashed_uniform;
  throw ConfigError("unknown oov policy '" + std::string(s) + "' (expected zeros or hashed-uniform)");
}

EmbeddingTable::EmbeddingTable(std::size_t dim, OovPolicy policy, std::uint64_t seed)
    : dim_(dim), policy_(policy), seed_(seed) {}

bool EmbeddingTable::add(std::string token, std::vector<double> vec) {
  if (vec.size() != dim_) throw DimensionError("embedding for " + token + " has wrong length");
  if (index_.contains(token)) return false;
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  data_.insert(data_.end(), vec.begin(), vec.end());
  return true;
}

bool EmbeddingTable::contains(std::string_view token) const { return index_.contains(std::string(token)); }

std::vector<double> EmbeddingTable::lookup(std::string_view token) const {
  if (auto it = index_.find(std::string(token)); it != index_.end()) {
    const auto* p = data_.data() + it->second * dim_;
    return {p, p + dim_};
  }
  std::vector<double> v(dim_, 0.0);
  if (policy_ == OovPolicy::hashed_uniform) {
    std::mt19937_64 rng(fnv1a(token) ^ seed_);
    std::uniform_real_distribution<double> d(-0.25, 0.25);
    for (auto& x : v) x = d(rng);
  }
  return v;
}

Tensor EmbeddingTable::embed(std::span<const std::string> tokens) const {
  Tensor out({tokens.size(), dim_});
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto v = lookup(tokens[t]);
    std::copy(v.begin(), v.end(), out.row(t).begin());
  }
  return out;
}

EmbeddingTable parse_embeddings(std::string_view text, OovPolicy policy, std::uint64_t seed) {
  EmbeddingTable table;
  bool have_dim = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> fields;
    std::size_t p = 0;
    while (p < line.size()) {
      const std::size_t s = line.find_first_not_of(" \t", p);
      if (s == std::string_view::npos) break;
      const std::size_t e = std::min(line.find_first_of(" \t", s), line.size());
      fields.push_back(line.substr(s, e - s));
      p = e;
    }
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      std::size_t a = 0, b = 0;
      const bool ints = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), a).ec == std::errc{} &&
                        std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), b).ec == std::errc{};
      if (ints) continue;  // word2vec "count dim" header
    }
    if (fields.size() < 2) throw DataError("embedding line " + std::to_string(line_no) + ": no vector values");
    std::vector<double> vec(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto f = fields[i];
      const auto r = std::from_chars(f.data(), f.data() + f.size(), vec[i - 1]);
      if (r.ec != std::errc{} || r.ptr != f.data() + f.size()) {
        throw DataError("embedding line " + std::to_string(line_no) + ": bad number \"" + std::string(f) + "\"");
      }
    }
    if (!have_dim) {
      table = EmbeddingTable(vec.size(), policy, seed);
      have_dim = true;
    } else if (vec.size() != table.dim()) {
      throw DataError("embedding line " + std::to_string(line_no) + ": expected " + std::to_string(table.dim()) +
                      " values, got " + std::to_string(vec.size()));
    }
    table.add(std::string(fields[0]), std::move(vec));
  }
  if (!have_dim) throw DataError("embedding file has no vectors");
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, OovPolicy policy, std::uint64_t seed) {
  return parse_embeddings(read_file(path), policy, seed);
}

std::string_view to_string(SplitMode mode) { return mode == SplitMode::zsid ? "zsid" : "gzsid"; }

SplitMode split_mode_from_string(std::string_view s) {
  if (s == "zsid") return SplitMode::zsid;
  if (s == "gzsid") return SplitMode::gzsid;
  throw ConfigError("split must be zsid or gzsid, got " + std::string(s));
}

Split make_split(std::span<const Utterance> corpus, const LabelSet& labels, const SplitSpec& spec) {
  if (!(spec.train_ratio > 0.0 && spec.train_ratio < 1.0)) {
    throw ConfigError("train ratio must lie in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_label(labels.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].origin != Origin::real) continue;
    by_label[labels.index(corpus[i].label)].push_back(i);
  }
  std::vector<char> to_train(corpus.size(), 0), to_test(corpus.size(), 0);
  if (spec.mode == SplitMode::zsid) {
    for (std::size_t k = 0; k < labels.size(); ++k)
      for (auto i : by_label[k]) (labels.is_seen(k) ? to_train : to_test)[i] = 1;
  } else {
    std::mt19937_64 rng(spec.seed);
    for (std::size_t k = 0; k < labels.size(); ++k) {
      auto idx = by_label[k];
      const std::size_t n = idx.size();
      if (labels.is_seen(k) && n < 2) {
        throw DataError("seen intent " + labels.name(k) + " has " + std::to_string(n) +
                        " utterances; a gzsid split needs at least 2");
      }
      std::shuffle(idx.begin(), idx.end(), rng);
      // The epsilon absorbs representation error, e.g. 0.7·100 = 69.999….
      const auto n_train = static_cast<std::size_t>(std::floor(spec.train_ratio * static_cast<double>(n) + 1e-9));
      if (labels.is_seen(k)) {
        for (std::size_t j = 0; j < n; ++j) (j < n_train ? to_train : to_test)[idx[j]] = 1;
      } else {
        for (std::size_t j = 0; j < n - n_train; ++j) to_test[idx[j]] = 1;
      }
    }
  }
  Split split;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (to_train[i]) split.train.push_back(corpus[i]);
    if (to_test[i]) split.test.push_back(corpus[i]);
  }
  return split;
}

std::vector<Utterance> augment_label_pseudo_utterances(std::vector<Utterance> train, const LabelMetadata& meta) {
  const LabelSet& labels = meta.labels;
  if (labels.unseen_count() == 0 || labels.seen_count() == 0) return train;
  std::size_t seen_total = 0;
  std::vector<std::size_t> existing(labels.size(), 0);
  for (const auto& u : train) {
    const std::size_t k = labels.index(u.label);
    ++existing[k];
    if (labels.is_seen(k) && u.origin == Origin::real) ++seen_total;
  }
  const auto target = static_cast<std::size_t>(
      std::llround(static_cast<double>(seen_total) / static_cast<double>(labels.seen_count())));
  for (std::size_t k = labels.seen_count(); k < labels.size(); ++k) {
    const auto tokens = meta.name_tokens(k);
    for (std::size_t n = existing[k]; n < target; ++n) {
      train.push_back({"pseudo:" + labels.name(k) + ":" + std::to_string(n), tokens, labels.name(k), Origin::label_pseudo});
    }
  }
  return train;
}

}  // namespace zsid
