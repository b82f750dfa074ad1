// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/synthetic.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <random>
#include <vector>

#include "json.hpp"
#include "zsid/errors.hpp"

namespace zsid {

namespace {

constexpr std::array<const char*, 26> kNames{
    "Alpha", "Bravo",  "Charlie", "Delta",   "Echo",   "Foxtrot", "Golf",   "Hotel",   "India",
    "Juliet", "Kilo",  "Lima",    "Mike",    "November", "Oscar", "Papa",   "Quebec",  "Romeo",
    "Sierra", "Tango", "Uniform", "Victor",  "Whiskey", "Xray",   "Yankee", "Zulu"};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void append_vector(std::string& out, const std::string& token, const std::vector<double>& v) {
  out += token;
  char buf[64];
  for (double x : v) {
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    out += ' ';
    out.append(buf, r.ptr);
  }
  out += '\n';
}

}  // namespace

SyntheticSpec ambiguous_synthetic_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.ambiguity = 0.15;
  s.seed = seed;
  return s;
}

SyntheticFiles make_synthetic(const SyntheticSpec& spec) {
  const std::size_t intents = spec.seen + spec.unseen;
  if (spec.seen == 0 || intents > kNames.size())
    throw ConfigError("synthetic corpus needs 1 to 26 intents with at least one seen");
  if (spec.dim == 0 || spec.words_per_intent == 0 || spec.per_intent == 0 || spec.min_length == 0 ||
      spec.min_length > spec.max_length)
    throw ConfigError("synthetic corpus sizes must be positive with min_length <= max_length");
  if (!(spec.ambiguity >= 0.0 && spec.ambiguity <= 1.0)) throw ConfigError("ambiguity must lie in [0, 1]");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto paired = [&](std::size_t k) -> std::size_t {
    if (spec.unseen == 0) return k;
    return k < spec.seen ? spec.seen + k % spec.unseen : (k - spec.seen) % spec.seen;
  };

  std::vector<std::vector<double>> prototypes(intents, std::vector<double>(spec.dim));
  for (auto& p : prototypes)
    for (auto& x : p) x = normal(rng);
  // Paired prototypes drift toward each other in proportion to the ambiguity.
  for (std::size_t k = spec.seen; k < intents; ++k) {
    const auto& partner = prototypes[paired(k)];
    for (std::size_t d = 0; d < spec.dim; ++d)
      prototypes[k][d] = (1.0 - spec.ambiguity) * prototypes[k][d] + spec.ambiguity * partner[d];
  }

  SyntheticFiles out;
  nlohmann::json labels;
  labels["seen"] = nlohmann::json::array();
  labels["unseen"] = nlohmann::json::array();
  for (std::size_t k = 0; k < intents; ++k) {
    labels[k < spec.seen ? "seen" : "unseen"].push_back(kNames[k]);
    append_vector(out.embeddings, lower(kNames[k]), prototypes[k]);
  }
  out.labels = labels.dump(2) + "\n";

  std::vector<std::vector<std::string>> words(intents);
  for (std::size_t k = 0; k < intents; ++k)
    for (std::size_t w = 0; w < spec.words_per_intent; ++w) {
      std::vector<double> v(spec.dim);
      for (std::size_t d = 0; d < spec.dim; ++d) v[d] = prototypes[k][d] + spec.spread * normal(rng);
      words[k].push_back("c" + std::to_string(k) + "w" + std::to_string(w));
      append_vector(out.embeddings, words[k].back(), v);
    }

  std::uniform_int_distribution<std::size_t> length(spec.min_length, spec.max_length);
  std::uniform_int_distribution<std::size_t> pick(0, spec.words_per_intent - 1);
  std::bernoulli_distribution borrow(spec.ambiguity);
  std::size_t id = 0;
  for (std::size_t k = 0; k < intents; ++k)
    for (std::size_t n = 0; n < spec.per_intent; ++n) {
      std::string text;
      const std::size_t len = length(rng);
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t source = borrow(rng) ? paired(k) : k;
        text += (t ? " " : "") + words[source][pick(rng)];
      }
      out.dataset += nlohmann::json{{"id", "syn-" + std::to_string(id++)}, {"text", text}, {"label", kNames[k]}}.dump();
      out.dataset += '\n';
    }
  return out;
}

void write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  const SyntheticFiles files = make_synthetic(spec);
  std::filesystem::create_directories(dir);
  for (const auto& [name, text] : {std::pair{"dataset.jsonl", &files.dataset}, std::pair{"labels.json", &files.labels},
                                   std::pair{"embeddings.txt", &files.embeddings}}) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw DataError("cannot write " + (dir / name).string());
    f << *text;
  }
}

}  // namespace zsid
