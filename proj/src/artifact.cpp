// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/artifact.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "zsid/errors.hpp"
#include "zsid/hash.hpp"

namespace zsid {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic{"ZSIDMDL\0", 8};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view bytes, std::size_t at, int width = 8) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

struct Writer {
  json directory = json::array();
  std::string payload;
  std::uint64_t offset = 0;

  void add(const std::string& name, const Tensor& t) {
    if (t.empty()) return;
    directory.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    for (double v : t.data()) put_u64(payload, std::bit_cast<std::uint64_t>(v));
    offset += t.size();
  }
};

struct Reader {
  std::map<std::string, Tensor> tensors;
  std::vector<std::string> order;

  Reader(const json& directory, std::string_view payload) {
    for (const auto& entry : directory) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      std::size_t count = 1;
      for (auto d : shape) count *= d;
      if ((offset + count) * 8 > payload.size()) throw DataError("model artifact truncated in tensor '" + name + "'");
      std::vector<double> data(count);
      for (std::size_t i = 0; i < count; ++i)
        data[i] = std::bit_cast<double>(get_u64(payload, static_cast<std::size_t>((offset + i) * 8)));
      tensors.emplace(name, Tensor(shape, std::move(data)));
      order.push_back(name);
    }
  }

  Tensor take(const std::string& name, bool required = true) {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      if (required) throw DataError("model artifact lacks tensor '" + name + "'");
      return {};
    }
    return it->second;
  }

  ParameterSet params(const std::string& prefix) {
    ParameterSet set;
    for (const auto& name : order)
      if (name.starts_with(prefix)) set.add(name.substr(prefix.size()), tensors.at(name));
    return set;
  }
};

Tensor trace_tensor(const std::vector<EpochStats>& trace) {
  Tensor t({trace.size(), 3});
  for (std::size_t e = 0; e < trace.size(); ++e) {
    t.at(e, 0) = trace[e].loss;
    t.at(e, 1) = trace[e].suid;
    t.at(e, 2) = trace[e].accuracy;
  }
  return t;
}

}  // namespace

std::string serialize_model(const TrainedModel& m) {
  Writer w;
  for (std::size_t i = 0; i < m.params.size(); ++i) w.add("param/" + m.params.name(i), m.params.value(i));
  Tensor emb({m.table.size(), m.table.dim()});
  for (std::size_t i = 0; i < m.table.size(); ++i)
    std::memcpy(emb.row(i).data(), m.table.vector(i).data(), m.table.dim() * sizeof(double));
  w.add("embeddings", emb);
  w.add("representations", m.representations.vectors);
  w.add("similarity.zsl", m.similarity_zsl);
  w.add("similarity.gzsl", m.similarity_gzsl);
  w.add("trace", trace_tensor(m.trace));
  if (m.stage_one) {
    for (std::size_t i = 0; i < m.stage_one->params.size(); ++i)
      w.add("stage_one/param/" + m.stage_one->params.name(i), m.stage_one->params.value(i));
    w.add("stage_one/reference", m.stage_one->reference);
    w.add("stage_one/threshold", Tensor::vector({m.stage_one->threshold}));
  }

  json header;
  json cfg = json::array();
  for (const auto& [k, v] : config_entries(m.config)) cfg.push_back({k, v});
  header["config"] = cfg;
  header["labels"] = {{"seen", m.meta.labels.seen()},
                      {"unseen", m.meta.labels.unseen()},
                      {"keyword_overrides", m.meta.keyword_overrides}};
  header["vocabulary"] = {{"tokens", m.table.tokens()},
                          {"dim", m.table.dim()},
                          {"oov", std::string(to_string(m.table.policy()))},
                          {"oov_seed", std::to_string(m.table.seed())}};
  header["representation_counts"] = m.representations.counts;
  header["tensors"] = w.directory;
  const std::string text = header.dump();

  std::string out(kMagic);
  put_u32(out, kArtifactVersion);
  put_u64(out, text.size());
  out += text;
  out += w.payload;
  put_u64(out, fnv1a(out));
  return out;
}

TrainedModel deserialize_model(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 4 + 8 + 8 || bytes.substr(0, kMagic.size()) != kMagic)
    throw DataError("not a model artifact (bad magic)");
  const auto version = static_cast<std::uint32_t>(get_u64(bytes, 8, 4));
  if (version != kArtifactVersion)
    throw DataError("unsupported model artifact version " + std::to_string(version) + " (expected " +
                    std::to_string(kArtifactVersion) + ")");
  const std::size_t body = bytes.size() - 8;
  if (get_u64(bytes, body) != fnv1a(bytes.substr(0, body))) throw DataError("model artifact checksum mismatch");
  const std::uint64_t header_len = get_u64(bytes, 12);
  const std::size_t header_at = 20;
  if (header_at + header_len > body) throw DataError("model artifact truncated in header");

  json header;
  try {
    header = json::parse(bytes.substr(header_at, header_len));
  } catch (const json::exception& e) {
    throw DataError(std::string("model artifact header is not valid JSON: ") + e.what());
  }
  Reader r(header.at("tensors"), bytes.substr(header_at + header_len, body - header_at - header_len));

  TrainedModel m;
  for (const auto& kv : header.at("config"))
    set_config_value(m.config, kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
  const json& labels = header.at("labels");
  m.meta.labels = LabelSet(labels.at("seen").get<std::vector<std::string>>(),
                           labels.at("unseen").get<std::vector<std::string>>());
  m.meta.keyword_overrides = labels.at("keyword_overrides").get<std::map<std::string, std::string>>();

  const json& vocab = header.at("vocabulary");
  const auto dim = vocab.at("dim").get<std::size_t>();
  m.table = EmbeddingTable(dim, oov_policy_from_string(vocab.at("oov").get<std::string>()),
                           std::stoull(vocab.at("oov_seed").get<std::string>()));
  const auto tokens = vocab.at("tokens").get<std::vector<std::string>>();
  if (!tokens.empty()) {
    const Tensor emb = r.take("embeddings");
    if (emb.rows() != tokens.size() || emb.cols() != dim) throw DataError("model artifact embedding shape mismatch");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto row = emb.row(i);
      m.table.add(tokens[i], std::vector<double>(row.begin(), row.end()));
    }
  }

  m.spec = model_spec(m.config, m.meta.labels, dim);
  m.params = r.params("param/");
  m.representations.vectors = r.take("representations");
  m.representations.counts = header.at("representation_counts").get<std::vector<std::size_t>>();
  m.similarity_zsl = r.take("similarity.zsl", false);
  m.similarity_gzsl = r.take("similarity.gzsl");
  const Tensor trace = r.take("trace", false);
  for (std::size_t e = 0; e < (trace.empty() ? 0 : trace.rows()); ++e)
    m.trace.push_back({trace.at(e, 0), trace.at(e, 1), trace.at(e, 2)});

  if (r.tensors.contains("stage_one/reference")) {
    StageOne s;
    s.spec.method = Method::linear;
    s.spec.extractor = extractor_config(m.config, m.config.stage_one_extractor, dim);
    s.spec.capsule = m.config.capsule;
    s.spec.seen = m.meta.labels.seen_count();
    s.params = r.params("stage_one/param/");
    s.reference = r.take("stage_one/reference");
    s.threshold = r.take("stage_one/threshold")[0];
    m.stage_one = std::move(s);
  }
  return m;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model artifact " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing model artifact " + path.string());
}

namespace {

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TrainedModel load_model(const std::filesystem::path& path) { return deserialize_model(read_bytes(path)); }

std::string checksum_hex(std::string_view bytes) { return hex64(fnv1a(bytes)); }

std::string file_checksum(const std::filesystem::path& path) { return checksum_hex(read_bytes(path)); }

}  // namespace zsid
