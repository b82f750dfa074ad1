// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/training.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "zsid/errors.hpp"
#include "zsid/hash.hpp"

namespace zsid {

namespace fs = std::filesystem;

// Fixed so the gradient reduction order never depends on the thread count.
constexpr std::size_t kChunk = 8;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                    std::string(expected) + ")");
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a number");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) { return static_cast<std::size_t>(to_u64(key, v)); }

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

fs::path to_path(std::string_view v, const fs::path& base) {
  if (v.empty()) return {};
  fs::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

std::vector<std::size_t> to_sizes(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  std::stringstream ss{std::string(v)};
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(to_size(key, trim(part)));
  if (out.empty()) bad_value(key, v, "a comma-separated list of integers");
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

using Setter = void (*)(TrainConfig&, std::string_view, std::string_view, const fs::path&);
using Getter = std::string (*)(const TrainConfig&);

struct KeyDef {
  const char* key;
  Setter set;
  Getter get;
};

#define ZSID_KEY(name, setter, getter)                                                                    \
  KeyDef {                                                                                                \
    name, [](TrainConfig& c, std::string_view k, std::string_view v, const fs::path& base) {              \
      (void)k;                                                                                            \
      (void)base;                                                                                         \
      setter;                                                                                             \
    },                                                                                                    \
        [](const TrainConfig& c) -> std::string { return getter; }                                        \
  }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table{
      ZSID_KEY("dataset", c.dataset = to_path(v, base), c.dataset.string()),
      ZSID_KEY("labels", c.labels = to_path(v, base), c.labels.string()),
      ZSID_KEY("embeddings", c.embeddings = to_path(v, base), c.embeddings.string()),
      ZSID_KEY("split_mode", c.split.mode = split_mode_from_string(v), std::string(to_string(c.split.mode))),
      ZSID_KEY("train_ratio", c.split.train_ratio = to_double(k, v), fmt(c.split.train_ratio)),
      ZSID_KEY("split_seed", c.split.seed = to_u64(k, v), fmt(c.split.seed)),
      ZSID_KEY("augment", c.augment = to_bool(k, v), fmt(c.augment)),
      ZSID_KEY("method", c.method = method_from_string(v), std::string(to_string(c.method))),
      ZSID_KEY("extractor",
               if (v == "auto") c.extractor.reset();
               else c.extractor = extractor_kind_from_string(v),
               c.extractor ? std::string(to_string(*c.extractor)) : std::string("auto")),
      ZSID_KEY("hidden_dim", c.hidden_dim = to_size(k, v), fmt(std::uint64_t{c.hidden_dim})),
      ZSID_KEY("heads", c.heads = to_size(k, v), fmt(std::uint64_t{c.heads})),
      ZSID_KEY("attention_dim", c.attention_dim = to_size(k, v), fmt(std::uint64_t{c.attention_dim})),
      ZSID_KEY("channels", c.channels = to_size(k, v), fmt(std::uint64_t{c.channels})),
      ZSID_KEY("kernel_widths", c.kernel_widths = to_sizes(k, v), join_sizes(c.kernel_widths)),
      ZSID_KEY("capsule_dim", c.capsule.capsule_dim = to_size(k, v), fmt(std::uint64_t{c.capsule.capsule_dim})),
      ZSID_KEY("routing_iterations", c.capsule.iterations = to_size(k, v), fmt(std::uint64_t{c.capsule.iterations})),
      ZSID_KEY("alpha", c.loss.alpha = to_double(k, v), fmt(c.loss.alpha)),
      ZSID_KEY("lambda", c.loss.lambda = to_double(k, v), fmt(c.loss.lambda)),
      ZSID_KEY("lambda_prime", c.loss.lambda_prime = to_double(k, v), fmt(c.loss.lambda_prime)),
      ZSID_KEY("m_plus", c.loss.m_plus = to_double(k, v), fmt(c.loss.m_plus)),
      ZSID_KEY("m_minus", c.loss.m_minus = to_double(k, v), fmt(c.loss.m_minus)),
      ZSID_KEY("m_plus_suid", c.loss.m_plus_suid = to_double(k, v), fmt(c.loss.m_plus_suid)),
      ZSID_KEY("m_minus_suid", c.loss.m_minus_suid = to_double(k, v), fmt(c.loss.m_minus_suid)),
      ZSID_KEY("attention_weight", c.loss.attention_weight = to_double(k, v), fmt(c.loss.attention_weight)),
      ZSID_KEY("margin_gamma", c.loss.margin_gamma = to_double(k, v), fmt(c.loss.margin_gamma)),
      ZSID_KEY("lmcl_scale", c.loss.lmcl_scale = to_double(k, v), fmt(c.loss.lmcl_scale)),
      ZSID_KEY("lmcl_margin", c.loss.lmcl_margin = to_double(k, v), fmt(c.loss.lmcl_margin)),
      ZSID_KEY("sigma", c.similarity.sigma = to_double(k, v), fmt(c.similarity.sigma)),
      ZSID_KEY("similarity_kernel", c.similarity.kernel = similarity_kernel_from_string(v),
               std::string(to_string(c.similarity.kernel))),
      ZSID_KEY("tau", c.similarity.tau = to_double(k, v), fmt(c.similarity.tau)),
      ZSID_KEY("row_normalize", c.similarity.row_normalize = to_bool(k, v), fmt(c.similarity.row_normalize)),
      ZSID_KEY("learning_rate", c.adam.learning_rate = to_double(k, v), fmt(c.adam.learning_rate)),
      ZSID_KEY("beta1", c.adam.beta1 = to_double(k, v), fmt(c.adam.beta1)),
      ZSID_KEY("beta2", c.adam.beta2 = to_double(k, v), fmt(c.adam.beta2)),
      ZSID_KEY("adam_epsilon", c.adam.epsilon = to_double(k, v), fmt(c.adam.epsilon)),
      ZSID_KEY("epochs", c.epochs = to_size(k, v), fmt(std::uint64_t{c.epochs})),
      ZSID_KEY("batch_size", c.batch_size = to_size(k, v), fmt(std::uint64_t{c.batch_size})),
      ZSID_KEY("seed", c.seed = to_u64(k, v), fmt(c.seed)),
      ZSID_KEY("trainable_embeddings", c.trainable_embeddings = to_bool(k, v), fmt(c.trainable_embeddings)),
      ZSID_KEY("oov", c.oov = oov_policy_from_string(v), std::string(to_string(c.oov))),
      ZSID_KEY("two_stage", c.two_stage = to_bool(k, v), fmt(c.two_stage)),
      ZSID_KEY("stage_one_extractor", c.stage_one_extractor = extractor_kind_from_string(v),
               std::string(to_string(c.stage_one_extractor))),
      ZSID_KEY("lof_k", c.lof_k = to_size(k, v), fmt(std::uint64_t{c.lof_k})),
      ZSID_KEY("lof_quantile", c.lof_quantile = to_double(k, v), fmt(c.lof_quantile)),
      ZSID_KEY("ablate", c.ablate = parse_ablation(v), to_string(c.ablate)),
  };
  return table;
}

#undef ZSID_KEY

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
  std::uint64_t h = fnv1a(tag, 0xcbf29ce484222325ULL ^ seed);
  for (int i = 0; i < 8; ++i) h = fnv1a(std::string_view(reinterpret_cast<const char*>(&index) + i, 1), h);
  return h;
}

// ---------------------------------------------------------------------------
// Optimization loop shared by the main model and the first stage.

struct Item {
  std::vector<std::size_t> ids;
  std::size_t label = 0;
};

using Leaf = std::function<Var(const std::vector<std::size_t>&)>;

struct Objective {
  ParameterSet* params = nullptr;
  // Per-graph nodes shared by every sample (compat label encodings).
  std::function<Var(const Binding&, const Leaf&)> shared;
  std::function<LossParts(const Binding&, Var x, std::size_t label, Var shared, bool& correct)> sample;
};

struct ChunkOut {
  std::vector<Tensor> grads;
  std::vector<std::pair<std::size_t, std::vector<double>>> embedding_grads;
  double loss = 0.0;
  double suid = 0.0;
  std::size_t correct = 0;
};

Tensor gather(const Tensor& table, const std::vector<std::size_t>& ids) {
  const std::size_t d = table.cols();
  Tensor out({ids.size(), d});
  for (std::size_t t = 0; t < ids.size(); ++t) std::copy_n(table.row(ids[t]).begin(), d, out.row(t).begin());
  return out;
}

ChunkOut run_chunk(const Objective& obj, const Tensor& embeddings, bool trainable, const std::vector<Item>& items,
                   std::span<const std::size_t> order) {
  Graph g(kernels::Exec::serial);
  const Binding b(g, *obj.params);
  std::vector<std::pair<Var, const std::vector<std::size_t>*>> leaves;
  const Leaf leaf = [&](const std::vector<std::size_t>& ids) {
    Tensor x = gather(embeddings, ids);
    if (!trainable) return g.constant(std::move(x));
    Var v = g.variable(std::move(x));
    leaves.emplace_back(v, &ids);
    return v;
  };
  const Var shared = obj.shared ? obj.shared(b, leaf) : Var{};
  ChunkOut out;
  Var total;
  for (std::size_t i : order) {
    bool correct = false;
    const LossParts parts = obj.sample(b, leaf(items[i].ids), items[i].label, shared, correct);
    const Var t = parts.total();
    total = total.valid() ? add(total, t) : t;
    if (parts.suid.valid()) out.suid += parts.suid.value().item();
    out.correct += correct;
  }
  out.loss = total.value().item();
  g.backward(total);
  out.grads = obj.params->zeros();
  b.accumulate_grads(g, out.grads);
  for (const auto& [v, ids] : leaves) {
    const Tensor* grad = g.grad_if_any(v);
    if (!grad) continue;
    for (std::size_t t = 0; t < ids->size(); ++t) {
      const auto r = grad->row(t);
      out.embedding_grads.emplace_back((*ids)[t], std::vector<double>(r.begin(), r.end()));
    }
  }
  return out;
}

/// Minibatch Adam over `items`; `embeddings` is updated in place when trainable.
std::vector<EpochStats> optimize(const Objective& obj, const std::vector<Item>& items, Tensor& embeddings,
                                 bool trainable, const TrainConfig& cfg, std::string_view tag,
                                 const EpochCallback& on_epoch) {
  if (items.empty()) throw DataError("no training utterances");
  Adam adam(cfg.adam, *obj.params);
  ParameterSet table_set;
  table_set.add("emb.table", embeddings);
  std::optional<Adam> table_adam;
  if (trainable) table_adam.emplace(cfg.adam, table_set);

  const std::size_t n = items.size();
  const int threads = kernels::configured_threads();
  std::vector<EpochStats> trace;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, std::string(tag) + ".shuffle", epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochStats stats;
    std::size_t correct = 0;
    for (std::size_t begin = 0, batch = 0; begin < n; begin += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const std::size_t chunks = (end - begin + kChunk - 1) / kChunk;
      std::vector<ChunkOut> outs(chunks);
      std::vector<std::exception_ptr> errors(chunks);
      const Tensor& table = table_set.value(0);
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (chunks > 1)
      for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        const std::size_t lo = begin + static_cast<std::size_t>(c) * kChunk;
        const std::size_t hi = std::min(end, lo + kChunk);
        try {
          outs[c] = run_chunk(obj, table, trainable, items, std::span(order).subspan(lo, hi - lo));
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
      for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

      std::vector<Tensor> grads = std::move(outs[0].grads);
      double loss = outs[0].loss;
      for (std::size_t c = 1; c < chunks; ++c) {
        for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += outs[c].grads[p];
        loss += outs[c].loss;
      }
      bool finite = std::isfinite(loss);
      for (const auto& gt : grads) finite = finite && gt.all_finite();
      if (!finite)
        throw NumericalError("training diverged: non-finite loss or gradient at epoch " + std::to_string(epoch + 1) +
                             ", batch " + std::to_string(batch + 1));
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (auto& gt : grads)
        for (auto& v : gt.data()) v *= inv;
      adam.step(*obj.params, grads);
      if (trainable) {
        std::vector<Tensor> tg = table_set.zeros();
        for (const auto& o : outs)
          for (const auto& [row, grad] : o.embedding_grads)
            for (std::size_t j = 0; j < grad.size(); ++j) tg[0].at(row, j) += grad[j] * inv;
        table_adam->step(table_set, tg);
      }
      for (const auto& o : outs) {
        stats.loss += o.loss;
        stats.suid += o.suid;
        correct += o.correct;
      }
    }
    stats.loss /= static_cast<double>(n);
    stats.suid /= static_cast<double>(n);
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    trace.push_back(stats);
    if (on_epoch) on_epoch(epoch + 1, stats);
  }
  embeddings = table_set.value(0);
  return trace;
}

struct Vocabulary {
  EmbeddingTable table;
  std::unordered_map<std::string, std::size_t> index;
  Tensor matrix;

  void add(const std::string& token, const EmbeddingTable& source) {
    if (index.contains(token)) return;
    index.emplace(token, index.size());
    table.add(token, source.lookup(token));
  }

  std::vector<std::size_t> ids(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(index.at(t));
    return out;
  }

  void finish() {
    const std::size_t d = table.dim();
    matrix = Tensor({table.size(), d});
    for (std::size_t i = 0; i < table.size(); ++i) std::copy_n(table.vector(i).begin(), d, matrix.row(i).begin());
  }
};

EmbeddingTable table_from(const Vocabulary& vocab, const Tensor& matrix) {
  EmbeddingTable out(vocab.table.dim(), vocab.table.policy(), vocab.table.seed());
  for (std::size_t i = 0; i < vocab.table.size(); ++i) {
    const auto r = matrix.row(i);
    out.add(vocab.table.tokens()[i], std::vector<double>(r.begin(), r.end()));
  }
  return out;
}

std::vector<Item> encode(const std::vector<Utterance>& utts, const Vocabulary& vocab, const LabelSet& labels) {
  std::vector<Item> out;
  out.reserve(utts.size());
  for (const auto& u : utts) out.push_back({vocab.ids(u.tokens), labels.index(u.label)});
  return out;
}

template <typename F>
void parallel_rows(kernels::Exec exec, std::size_t n, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  const int threads = exec == kernels::Exec::parallel ? kernels::configured_threads() : 1;
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (threads > 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Tensor identity_columns(std::size_t classes, std::size_t first) {
  Tensor out({classes, classes - first});
  for (std::size_t j = first; j < classes; ++j) out.at(j, j - first) = 1.0;
  return out;
}

Tensor label_encodings(const ModelSpec& spec, const ParameterSet& params, const EmbeddingTable& table,
                       const LabelMetadata& meta) {
  Graph g(kernels::Exec::serial);
  const Binding b(g, params);
  std::vector<Var> names;
  for (std::size_t k = 0; k < meta.labels.size(); ++k) names.push_back(g.constant(table.embed(meta.name_tokens(k))));
  return encode_labels(spec, b, names).value();
}

Var stage_one_feature(const ModelSpec& spec, const Binding& b, Var x) {
  return reduce(ReduceOp::mean, extract(spec.extractor, b, x).hidden, 0);
}

StageOne train_stage_one(const TrainConfig& cfg, const LabelMetadata& meta, const std::vector<Utterance>& train,
                         const Vocabulary& vocab, const Tensor& embeddings) {
  StageOne s;
  s.spec.method = Method::linear;
  s.spec.extractor = extractor_config(cfg, cfg.stage_one_extractor, embeddings.cols());
  s.spec.capsule = cfg.capsule;
  s.spec.seen = meta.labels.seen_count();
  Rng rng(derive_seed(cfg.seed, "stage-one.init"));
  init_model(s.spec, s.params, rng);

  std::vector<Utterance> real;
  for (const auto& u : train)
    if (u.origin == Origin::real && meta.labels.is_seen(meta.labels.index(u.label))) real.push_back(u);
  const std::vector<Item> items = encode(real, vocab, meta.labels);
  if (items.size() < 2) throw DataError("two-stage mode needs at least two seen training utterances");

  Objective obj;
  obj.params = &s.params;
  obj.sample = [&](const Binding& b, Var x, std::size_t label, Var, bool& correct) {
    const Var feature = stage_one_feature(s.spec, b, x);
    const Var w = b["cls.w"];
    correct = argmax(compatibility_scores(feature, transpose(w)).value().data()) == label;
    return LossParts{lmcl_loss(feature, label, w, cfg.loss.lmcl_scale, cfg.loss.lmcl_margin), {}, {}};
  };
  Tensor frozen = embeddings;
  optimize(obj, items, frozen, false, cfg, "stage-one", {});

  s.reference = Tensor({items.size(), s.spec.extractor.hidden_dim});
  parallel_rows(kernels::Exec::parallel, items.size(), [&](std::size_t i) {
    Graph g(kernels::Exec::serial);
    const Binding b(g, s.params);
    const Tensor f = stage_one_feature(s.spec, b, g.constant(gather(embeddings, items[i].ids))).value();
    std::copy(f.data().begin(), f.data().end(), s.reference.row(i).begin());
  });
  const LofModel lof(s.reference, std::min(cfg.lof_k, items.size() - 1));
  s.threshold = quantile(lof.training_scores(), cfg.lof_quantile);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

AblationFlags parse_ablation(std::string_view text) {
  AblationFlags f;
  const std::string t = trim(text);
  if (t.empty() || t == "none") return f;
  std::stringstream ss(t);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part == "no-mt") f.no_mt = true;
    else if (part == "no-ss") f.no_ss = true;
    else if (part == "es") f.es = true;
    else throw ConfigError("unknown ablation '" + part + "' (expected no-mt, no-ss or es)");
  }
  if (f.no_ss && f.es) throw ConfigError("ablations no-ss and es are mutually exclusive");
  return f;
}

std::string to_string(const AblationFlags& f) {
  std::string out;
  for (auto [on, name] : {std::pair{f.no_mt, "no-mt"}, std::pair{f.no_ss, "no-ss"}, std::pair{f.es, "es"}})
    if (on) out += (out.empty() ? "" : ",") + std::string(name);
  return out.empty() ? "none" : out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& d : key_table()) k.emplace_back(d.key);
    return k;
  }();
  return keys;
}

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value, const fs::path& base_dir) {
  for (const auto& d : key_table())
    if (key == d.key) return d.set(cfg, key, value, base_dir);
  std::string valid;
  for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k;
  throw ConfigError("unknown config key '" + std::string(key) + "'; valid keys: " + valid);
}

TrainConfig parse_config(std::string_view text, const fs::path& base_dir) {
  TrainConfig cfg;
  std::stringstream ss{std::string(text)};
  std::string line;
  std::vector<std::string> seen;
  for (std::size_t number = 1; std::getline(ss, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      throw ConfigError("config line " + std::to_string(number) + ": duplicate key '" + key + "'");
    seen.push_back(key);
    set_config_value(cfg, key, trim(std::string_view(line).substr(eq + 1)), base_dir);
  }
  return cfg;
}

TrainConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), fs::absolute(path).parent_path());
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& d : key_table()) out.emplace_back(d.key, d.get(cfg));
  return out;
}

std::string config_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(cfg.split.train_ratio > 0.0 && cfg.split.train_ratio < 1.0))
    throw ConfigError("train_ratio must lie strictly between 0 and 1");
  if (!(cfg.adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(cfg.adam.beta1 >= 0.0 && cfg.adam.beta1 < 1.0 && cfg.adam.beta2 >= 0.0 && cfg.adam.beta2 < 1.0))
    throw ConfigError("beta1 and beta2 must lie in [0, 1)");
  if (!(cfg.adam.epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  if (cfg.lof_k == 0) throw ConfigError("lof_k must be >= 1");
  if (!(cfg.lof_quantile > 0.0 && cfg.lof_quantile <= 1.0)) throw ConfigError("lof_quantile must lie in (0, 1]");
  if (cfg.two_stage && cfg.split.mode != SplitMode::gzsid)
    throw ConfigError("two_stage requires split_mode = gzsid");
  if (cfg.ablate.no_ss && cfg.ablate.es) throw ConfigError("ablations no-ss and es are mutually exclusive");
  validate(cfg.loss);
  validate(cfg.similarity);
}

TrainConfig ablation_variant(TrainConfig cfg, const AblationFlags& flags) {
  cfg.ablate.no_mt = cfg.ablate.no_mt || flags.no_mt;
  cfg.ablate.no_ss = cfg.ablate.no_ss || flags.no_ss;
  cfg.ablate.es = cfg.ablate.es || flags.es;
  if (cfg.ablate.no_ss && cfg.ablate.es) throw ConfigError("ablations no-ss and es are mutually exclusive");
  if (cfg.ablate.no_mt) {
    cfg.loss.alpha = 0.0;
    cfg.loss.lambda_prime = 0.0;
  }
  return cfg;
}

ExtractorConfig extractor_config(const TrainConfig& cfg, ExtractorKind kind, std::size_t embed_dim) {
  ExtractorConfig e;
  e.kind = kind;
  e.embed_dim = embed_dim;
  e.hidden_dim = cfg.hidden_dim;
  e.heads = cfg.heads;
  e.attention_dim = cfg.attention_dim;
  e.kernel_widths = cfg.kernel_widths;
  e.channels = cfg.channels;
  return e;
}

ModelSpec model_spec(const TrainConfig& cfg, const LabelSet& labels, std::size_t embed_dim) {
  ModelSpec spec;
  spec.method = cfg.method;
  spec.extractor = extractor_config(cfg, cfg.extractor.value_or(default_extractor(cfg.method)), embed_dim);
  spec.capsule = cfg.capsule;
  spec.seen = labels.seen_count();
  spec.unseen = labels.unseen_count();
  validate(spec);
  return spec;
}

PreparedData prepare_data(const TrainConfig& cfg) { return prepare_data(cfg, cfg.split.mode); }

PreparedData prepare_data(const TrainConfig& cfg, SplitMode mode) {
  for (const auto& [name, p] : {std::pair{"dataset", &cfg.dataset}, std::pair{"labels", &cfg.labels},
                                std::pair{"embeddings", &cfg.embeddings}}) {
    if (p->empty()) throw ConfigError(std::string("config key '") + name + "' is required");
    if (!fs::exists(*p)) throw DataError(std::string(name) + " file not found: " + p->string());
  }
  PreparedData data;
  data.corpus = load_corpus(cfg.dataset, cfg.labels);
  data.table = load_embeddings(cfg.embeddings, cfg.oov, cfg.split.seed);
  SplitSpec spec = cfg.split;
  spec.mode = mode;
  data.split = make_split(data.corpus.utterances, data.corpus.meta.labels, spec);
  return data;
}

TrainedModel train(const TrainConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  return train(config, prepare_data(config), on_epoch);
}

TrainedModel train(const TrainConfig& config, const PreparedData& data, const EpochCallback& on_epoch) {
  const TrainConfig cfg = ablation_variant(config, config.ablate);
  validate(cfg);
  const LabelMetadata& meta = data.corpus.meta;
  if (data.table.dim() == 0) throw DataError("embedding table is empty");

  TrainedModel model;
  model.config = cfg;
  model.meta = meta;
  model.spec = model_spec(cfg, meta.labels, data.table.dim());

  Vocabulary vocab;
  vocab.table = EmbeddingTable(data.table.dim(), data.table.policy(), data.table.seed());
  for (const auto* set : {&data.corpus.utterances, &data.split.train, &data.split.test})
    for (const auto& u : *set)
      for (const auto& t : u.tokens) vocab.add(t, data.table);
  std::vector<std::vector<std::size_t>> label_ids;
  for (std::size_t k = 0; k < meta.labels.size(); ++k) {
    const auto name = meta.name_tokens(k);
    for (const auto& t : name) vocab.add(t, data.table);
    label_ids.push_back(vocab.ids(name));
  }
  vocab.finish();

  // Every intent needs items to average, so representations always come from
  // the augmented set even when training without augmentation.
  const std::vector<Utterance> augmented = augment_label_pseudo_utterances(data.split.train, meta);
  const std::vector<Item> train_items = encode(cfg.augment ? augmented : data.split.train, vocab, meta.labels);
  const std::vector<Item> rep_items = encode(augmented, vocab, meta.labels);

  Rng init_rng(derive_seed(cfg.seed, "init"));
  init_model(model.spec, model.params, init_rng);

  const ModelSpec& spec = model.spec;
  const LossConfig& loss_cfg = cfg.loss;
  Objective obj;
  obj.params = &model.params;
  if (!is_transformation_based(spec.method)) {
    obj.shared = [&](const Binding& b, const Leaf& leaf) {
      std::vector<Var> names;
      for (const auto& ids : label_ids) names.push_back(leaf(ids));
      return encode_labels(spec, b, names);
    };
  }
  obj.sample = [&](const Binding& b, Var x, std::size_t label, Var shared, bool& correct) {
    const ForwardPass pass = forward(spec, b, x, shared);
    correct = argmax(pass.scores.value().data()) == label;
    return sample_loss(spec, pass, label, loss_cfg);
  };
  Tensor embeddings = vocab.matrix;
  model.trace = optimize(obj, train_items, embeddings, cfg.trainable_embeddings, cfg, "main", on_epoch);
  model.table = table_from(vocab, embeddings);

  Tensor reps({rep_items.size(), spec.extractor.hidden_dim});
  std::vector<std::size_t> rep_labels(rep_items.size());
  parallel_rows(kernels::Exec::parallel, rep_items.size(), [&](std::size_t i) {
    Graph g(kernels::Exec::serial);
    const Binding b(g, model.params);
    const Extracted f = extract(spec.extractor, b, g.constant(gather(embeddings, rep_items[i].ids)));
    const Tensor r = representation(spec, f).value();
    std::copy(r.data().begin(), r.data().end(), reps.row(i).begin());
    rep_labels[i] = rep_items[i].label;
  });
  model.representations = average_representations(reps, rep_labels, meta.labels);

  const std::size_t classes = spec.classes();
  const std::size_t seen = spec.seen;
  auto matrix_for = [&](SimilarityMode mode) {
    if (cfg.ablate.no_ss) return identity_columns(classes, mode == SimilarityMode::zsl ? seen : 0);
    if (cfg.ablate.es) return embedding_similarity_baseline(meta, vocab.table, mode, cfg.similarity);
    return build_similarity_matrix(model.representations.vectors, seen, mode, cfg.similarity);
  };
  model.similarity_gzsl = matrix_for(SimilarityMode::gzsl);
  if (spec.unseen > 0) model.similarity_zsl = matrix_for(SimilarityMode::zsl);

  if (cfg.two_stage) model.stage_one = train_stage_one(cfg, meta, data.split.train, vocab, embeddings);
  return model;
}

Tensor effective_similarity(const TrainedModel& model, SimilarityMode mode) {
  if (mode == SimilarityMode::zsl && model.spec.unseen == 0)
    throw ConfigError("the model has no unseen intents, so it has no zsl similarity matrix");
  return mode == SimilarityMode::zsl ? model.similarity_zsl : model.similarity_gzsl;
}

// ---------------------------------------------------------------------------

Predictor::Predictor(const TrainedModel& model) : model_(&model) {
  for (std::size_t k = 0; k < model.spec.classes(); ++k) {
    all_.push_back(k);
    if (k >= model.spec.seen) unseen_.push_back(k);
  }
  if (!is_transformation_based(model.spec.method))
    label_reps_ = label_encodings(model.spec, model.params, model.table, model.meta);
  if (model.stage_one) {
    const Tensor& ref = model.stage_one->reference;
    lof_.emplace(ref, std::min(model.config.lof_k, ref.rows() - 1));
  }
}

Tensor Predictor::embed(std::span<const std::string> tokens) const {
  if (tokens.empty()) throw DataError("cannot score an empty utterance");
  return model_->table.embed(tokens);
}

std::vector<double> Predictor::representation(std::span<const std::string> tokens) const {
  Graph g(kernels::Exec::serial);
  const Binding b(g, model_->params);
  const Extracted f = extract(model_->spec.extractor, b, g.constant(embed(tokens)));
  return zsid::representation(model_->spec, f).value().values();
}

Prediction Predictor::predict_raw(std::span<const std::string> tokens) const {
  const ModelSpec& spec = model_->spec;
  if (!is_transformation_based(spec.method)) return compat_predict(representation(tokens), label_reps_, all_);
  Graph g(kernels::Exec::serial);
  const Binding b(g, model_->params);
  const ForwardPass pass = forward(spec, b, g.constant(embed(tokens)));
  return predict_from_scores(pass.scores.value().values(), spec.classes(), spec.seen);
}

Prediction Predictor::predict(std::span<const std::string> tokens, SimilarityMode mode) const {
  const ModelSpec& spec = model_->spec;
  if (mode == SimilarityMode::zsl && spec.unseen == 0) throw ConfigError("the model has no unseen intents");
  if (!is_transformation_based(spec.method))
    return compat_predict(representation(tokens), label_reps_, mode == SimilarityMode::zsl ? unseen_ : all_);
  const Tensor& sim = mode == SimilarityMode::zsl ? model_->similarity_zsl : model_->similarity_gzsl;
  Graph g(kernels::Exec::serial);
  const Binding b(g, model_->params);
  const Extracted f = extract(spec.extractor, b, g.constant(embed(tokens)));
  if (spec.method == Method::linear)
    return zsid_predict_linear(f.hidden.value(), model_->params["cls.w"], sim, spec.seen);
  return zsid_predict_capsule(f.heads.value(), model_->params["cls.caps.w"], spec.capsule, sim, spec.seen);
}

Prediction Predictor::predict_two_stage(std::span<const std::string> tokens) const {
  if (!model_->stage_one) throw ConfigError("the model has no first stage; retrain with two_stage = true");
  const StageOne& s = *model_->stage_one;
  Graph g(kernels::Exec::serial);
  const Binding b(g, s.params);
  const Var feature = stage_one_feature(s.spec, b, g.constant(embed(tokens)));
  const Tensor seen = compatibility_scores(feature, transpose(b["cls.w"])).value();
  const Tensor& f = feature.value();
  const double score = lof_->scores(Tensor({1, f.size()}, f.values()), kernels::Exec::serial)[0];
  return two_stage_combine(score, s.threshold, seen.data(), predict(tokens, SimilarityMode::zsl));
}

void check_evaluation(const TrainedModel& model, SplitMode mode, bool two_stage) {
  if (mode == SplitMode::gzsid && model.config.split.mode == SplitMode::zsid)
    throw ConfigError("model was trained with split_mode = zsid; gzsid evaluation would score its seen training data");
  if (mode == SplitMode::zsid && model.spec.unseen == 0) throw ConfigError("zsid evaluation needs unseen intents");
  if (two_stage && mode != SplitMode::gzsid) throw ConfigError("two-stage evaluation applies to gzsid only");
  if (two_stage && !model.stage_one) throw ConfigError("the model has no first stage; retrain with two_stage = true");
}

Evaluation evaluate(const TrainedModel& model, std::span<const Utterance> test, SplitMode mode, bool two_stage,
                    kernels::Exec exec) {
  check_evaluation(model, mode, two_stage);
  if (test.empty()) throw DataError("evaluation split is empty");
  const Predictor predictor(model);
  Evaluation ev;
  ev.items.assign(test.begin(), test.end());
  ev.gold.resize(test.size());
  ev.predictions.resize(test.size());
  const SimilarityMode sim = mode == SplitMode::zsid ? SimilarityMode::zsl : SimilarityMode::gzsl;
  for (std::size_t i = 0; i < test.size(); ++i) ev.gold[i] = model.meta.labels.index(test[i].label);
  parallel_rows(exec, test.size(), [&](std::size_t i) {
    ev.predictions[i] = two_stage ? predictor.predict_two_stage(test[i].tokens) : predictor.predict(test[i].tokens, sim);
  });
  std::vector<std::size_t> predicted(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) predicted[i] = ev.predictions[i].label;
  ev.report = mode == SplitMode::zsid ? unseen_report(predicted, ev.gold, model.meta.labels)
                                      : grouped_report(predicted, ev.gold, model.meta.labels);
  return ev;
}

}  // namespace zsid
