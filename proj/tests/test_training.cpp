// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "support/family_gradcheck.hpp"
#include "support/fixtures.hpp"
#include "zsid/artifact.hpp"
#include "zsid/errors.hpp"
#include "zsid/training.hpp"

using namespace zsid;
using namespace zsid::testing;

namespace {

constexpr Method kMethods[] = {Method::linear, Method::capsule, Method::compat_dnn, Method::compat_cdssm};

SyntheticSpec separable_spec() {
  SyntheticSpec s;
  s.seen = 2;
  s.unseen = 1;
  s.per_intent = 20;
  return s;
}

struct ThreadCap {
  explicit ThreadCap(const char* n) { ::setenv("DIR_NUM_THREADS", n, 1); }
  ~ThreadCap() { ::unsetenv("DIR_NUM_THREADS"); }
};

}  // namespace

TEST_CASE("config text round-trips exactly") {
  TrainConfig c;
  c.dataset = "/data/x.jsonl";
  c.method = Method::capsule;
  c.extractor = ExtractorKind::birnn_attention;
  c.loss.alpha = 0.1 + 0.2;  // not representable in short decimal
  c.kernel_widths = {1, 5};
  c.ablate.no_mt = true;
  c.ablate.es = true;
  c.oov = OovPolicy::hashed_uniform;
  const TrainConfig back = parse_config(config_text(c));
  CHECK(config_entries(back) == config_entries(c));
  CHECK(back.loss.alpha == c.loss.alpha);
  CHECK(back.ablate == c.ablate);
  CHECK(config_keys().size() == config_entries(c).size());

  const TrainConfig rel = parse_config("dataset = d/a.jsonl  # comment\n\n# full comment\n", "/base");
  CHECK(rel.dataset == std::filesystem::path("/base/d/a.jsonl"));
  CHECK(!parse_config("extractor = auto\n").extractor);
}

TEST_CASE("config errors") {
  try {
    parse_config("alpah = 0.5\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("alpah") != std::string::npos);
    CHECK(msg.find("lambda_prime") != std::string::npos);  // lists valid keys
  }
  CHECK_THROWS_AS(parse_config("alpha = 0.5\nalpha = 0.6\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("alpha 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = -3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("alpha = nan\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("augment = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("method = svm\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/zsid.cfg"), ConfigError);

  TrainConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.two_stage = true;
  c.split.mode = SplitMode::zsid;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("ablation flags") {
  CHECK(parse_ablation("") == AblationFlags{});
  CHECK(parse_ablation("none") == AblationFlags{});
  const AblationFlags f = parse_ablation("no-mt, es");
  CHECK(f.no_mt);
  CHECK(f.es);
  CHECK(!f.no_ss);
  CHECK(to_string(f) == "no-mt,es");
  CHECK_THROWS_AS(parse_ablation("no-ss,es"), ConfigError);
  CHECK_THROWS_AS(parse_ablation("no-xx"), ConfigError);

  const TrainConfig v = ablation_variant(TrainConfig{}, parse_ablation("no-mt"));
  CHECK(v.loss.alpha == 0.0);
  CHECK(v.loss.lambda_prime == 0.0);
  TrainConfig es;
  es.ablate.es = true;
  CHECK_THROWS_AS(ablation_variant(es, parse_ablation("no-ss")), ConfigError);
}

TEST_CASE("end-to-end gradients for every method family") {
  for (Method m : kMethods)
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      CAPTURE(to_string(m));
      CAPTURE(seed);
      CHECK(family_gradient_error(m, seed) < 1e-4);
    }
}

TEST_CASE("without augmentation or SUID, unseen columns only receive the softmax push-down") {
  // d(-log p_y)/dW[:, j] = sum_i p_ij rep_i for every class j never used as a target.
  FamilyFixture f = family_fixture(Method::linear, 3);
  f.loss.alpha = 0.0;
  f.labels = {0, 1, 0};
  Graph g(kernels::Exec::serial);
  const Binding b(g, f.params);
  Var total;
  std::vector<Tensor> reps, probs;
  for (std::size_t i = 0; i < 3; ++i) {
    const ForwardPass pass = forward(f.spec, b, g.constant(f.utterances[i]));
    reps.push_back(pass.representation.value());
    probs.push_back(pass.scores.value());
    const LossParts parts = sample_loss(f.spec, pass, f.labels[i], f.loss);
    CHECK(!parts.suid.valid());
    const Var t = parts.total();
    total = total.valid() ? add(total, t) : t;
  }
  g.backward(total);
  const Tensor grad = g.grad(b["cls.w"]);
  for (std::size_t d = 0; d < f.spec.extractor.hidden_dim; ++d) {
    double expected = 0.0;
    for (std::size_t i = 0; i < 3; ++i) expected += probs[i][2] * reps[i][d];
    CHECK(grad.at(d, 2) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("one epoch populates representations and both similarity matrices") {
  const auto dir = scratch_dir("train-one-epoch");
  SyntheticSpec spec = separable_spec();
  spec.per_intent = 5;
  TrainConfig cfg = synthetic_config(dir, spec);
  cfg.epochs = 1;
  const TrainedModel m = train(cfg);
  CHECK(m.trace.size() == 1);
  CHECK(m.representations.vectors.shape() == Shape{3, cfg.hidden_dim});
  CHECK(m.similarity_gzsl.shape() == Shape{3, 3});
  CHECK(m.similarity_zsl.shape() == Shape{3, 1});
  for (auto n : m.representations.counts) CHECK(n > 0);
  // Consistent with the stored representations and similarity settings.
  const Tensor rebuilt = build_similarity_matrix(m.representations.vectors, 2, SimilarityMode::gzsl, cfg.similarity);
  CHECK(rebuilt.values() == m.similarity_gzsl.values());
}

TEST_CASE("training is deterministic and independent of the thread count") {
  const auto dir = scratch_dir("train-determinism");
  TrainConfig cfg = synthetic_config(dir);
  cfg.epochs = 3;
  for (Method method : kMethods) {
    CAPTURE(to_string(method));
    cfg.method = method;
    std::string one, many;
    {
      ThreadCap cap("1");
      one = serialize_model(train(cfg));
    }
    {
      ThreadCap cap("4");
      many = serialize_model(train(cfg));
    }
    CHECK(one == many);
    CHECK(serialize_model(train(cfg)) == many);
  }
  TrainConfig other = cfg;
  other.seed = 1;
  CHECK(serialize_model(train(other)) != serialize_model(train(cfg)));
}

TEST_CASE("separable fixture is fit exactly") {
  const auto dir = scratch_dir("train-separable");
  TrainConfig cfg = synthetic_config(dir, separable_spec());
  cfg.epochs = 30;
  const PreparedData data = prepare_data(cfg);
  const auto augmented = augment_label_pseudo_utterances(data.split.train, data.corpus.meta);
  for (Method method : kMethods) {
    CAPTURE(to_string(method));
    cfg.method = method;
    const TrainedModel m = train(cfg, data);
    const Predictor p(m);
    std::size_t correct = 0;
    for (const auto& u : augmented) correct += p.predict_raw(u.tokens).label == m.meta.labels.index(u.label);
    CHECK(correct == augmented.size());
    CHECK(m.trace.back().loss <= m.trace.front().loss);
  }
}

TEST_CASE("no-mt removes the SUID term from every batch") {
  const auto dir = scratch_dir("train-no-mt");
  TrainConfig cfg = synthetic_config(dir);
  cfg.epochs = 3;
  cfg.ablate.no_mt = true;
  for (Method method : kMethods) {
    CAPTURE(to_string(method));
    cfg.method = method;
    const TrainedModel m = train(cfg);
    CHECK(m.config.loss.alpha == 0.0);
    for (const auto& e : m.trace) CHECK(e.suid == 0.0);
    TrainConfig full = cfg;
    full.ablate = {};
    bool any_suid = false;
    for (const auto& e : train(full).trace) any_suid = any_suid || e.suid > 0.0;
    CHECK(any_suid);
  }
}

TEST_CASE("no-ss gives the untransformed argmax") {
  const auto dir = scratch_dir("train-no-ss");
  TrainConfig cfg = synthetic_config(dir);
  cfg.epochs = 3;
  cfg.ablate.no_ss = true;
  const PreparedData data = prepare_data(cfg);
  for (Method method : {Method::linear, Method::capsule}) {
    cfg.method = method;
    const TrainedModel m = train(cfg, data);
    CHECK(m.similarity_gzsl.values() == Tensor::identity(5).values());
    const Predictor p(m);
    for (const auto& u : data.split.test) CHECK(p.predict(u.tokens, SimilarityMode::gzsl).label == p.predict_raw(u.tokens).label);
  }
}

TEST_CASE("es similarity depends only on embeddings and label names") {
  const auto dir = scratch_dir("train-es");
  TrainConfig cfg = synthetic_config(dir);
  cfg.epochs = 2;
  cfg.ablate.es = true;
  const PreparedData data = prepare_data(cfg);
  const TrainedModel a = train(cfg, data);
  cfg.seed = 9;
  cfg.method = Method::compat_cdssm;
  const TrainedModel b = train(cfg, data);
  CHECK(a.similarity_gzsl.values() == b.similarity_gzsl.values());
  CHECK(a.similarity_zsl.values() == b.similarity_zsl.values());
  const Tensor direct = embedding_similarity_baseline(data.corpus.meta, data.table, SimilarityMode::gzsl, cfg.similarity);
  CHECK(a.similarity_gzsl.values() == direct.values());
}

TEST_CASE("embeddings stay frozen unless trainable") {
  const auto dir = scratch_dir("train-embeddings");
  TrainConfig cfg = synthetic_config(dir);
  cfg.epochs = 2;
  const PreparedData data = prepare_data(cfg);
  const TrainedModel frozen = train(cfg, data);
  CHECK(frozen.table.size() > 0);
  for (std::size_t i = 0; i < frozen.table.size(); ++i)
    CHECK(frozen.table.lookup(frozen.table.tokens()[i]) == data.table.lookup(frozen.table.tokens()[i]));

  cfg.trainable_embeddings = true;
  const TrainedModel tuned = train(cfg, data);
  const std::string& used = data.split.train.front().tokens.front();
  CHECK(tuned.table.lookup(used) != data.table.lookup(used));
}

TEST_CASE("divergence reports its location") {
  const auto dir = scratch_dir("train-diverge");
  TrainConfig cfg = synthetic_config(dir);
  cfg.adam.learning_rate = 1e300;
  try {
    train(cfg);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
  }
}

TEST_CASE("evaluation guards and report shapes") {
  const auto dir = scratch_dir("train-eval");
  TrainConfig cfg = synthetic_config(dir);
  cfg.epochs = 5;
  cfg.method = Method::compat_dnn;
  cfg.two_stage = true;
  const TrainedModel m = train(cfg);
  const PreparedData gz = prepare_data(cfg, SplitMode::gzsid);
  const PreparedData z = prepare_data(cfg, SplitMode::zsid);

  const Evaluation e = evaluate(m, gz.split.test, SplitMode::gzsid, true);
  bool seen_route = false, unseen_route = false;
  for (const auto& p : e.predictions) {
    CHECK(p.route != Route::direct);
    seen_route = seen_route || p.route == Route::two_stage_seen;
    unseen_route = unseen_route || p.route == Route::two_stage_unseen;
  }
  CHECK(seen_route);
  CHECK(unseen_route);
  CHECK(e.report.seen);
  CHECK(e.report.overall);

  const Evaluation ze = evaluate(m, z.split.test, SplitMode::zsid, false);
  CHECK(!ze.report.seen);
  CHECK(!ze.report.overall);
  for (const auto& p : ze.predictions) CHECK(p.label >= 3);
  CHECK_THROWS_AS(evaluate(m, z.split.test, SplitMode::zsid, true), ConfigError);

  TrainConfig plain = cfg;
  plain.two_stage = false;
  plain.epochs = 1;
  CHECK_THROWS_AS(check_evaluation(train(plain), SplitMode::gzsid, true), ConfigError);

  TrainConfig zsid_cfg = plain;
  zsid_cfg.split.mode = SplitMode::zsid;
  CHECK_THROWS_AS(check_evaluation(train(zsid_cfg), SplitMode::gzsid, false), ConfigError);
}

TEST_CASE("artifact round-trips bit-exactly") {
  const auto dir = scratch_dir("train-artifact");
  TrainConfig cfg = synthetic_config(dir);
  cfg.epochs = 2;
  for (Method method : kMethods) {
    CAPTURE(to_string(method));
    cfg.method = method;
    cfg.two_stage = method == Method::linear;
    const TrainedModel m = train(cfg);
    const std::string bytes = serialize_model(m);
    const TrainedModel back = deserialize_model(bytes);
    CHECK(serialize_model(back) == bytes);
    CHECK(back.representations.vectors.values() == m.representations.vectors.values());
    CHECK(back.stage_one.has_value() == cfg.two_stage);

    const PreparedData data = prepare_data(cfg);
    const Evaluation a = evaluate(m, data.split.test, SplitMode::gzsid, false);
    const Evaluation b = evaluate(back, data.split.test, SplitMode::gzsid, false);
    for (std::size_t i = 0; i < a.predictions.size(); ++i) CHECK(a.predictions[i].scores == b.predictions[i].scores);

    save_model(m, dir / "m.zsid");
    CHECK(file_checksum(dir / "m.zsid") == checksum_hex(bytes));
    CHECK(serialize_model(load_model(dir / "m.zsid")) == bytes);
  }
}

TEST_CASE("corrupt artifacts are rejected") {
  const auto dir = scratch_dir("train-corrupt");
  TrainConfig cfg = synthetic_config(dir);
  cfg.epochs = 1;
  const std::string bytes = serialize_model(train(cfg));
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x20;
  CHECK_THROWS_AS(deserialize_model(flipped), DataError);
  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 3)), DataError);
  CHECK_THROWS_AS(deserialize_model("not a model"), DataError);
  std::string version = bytes;
  version[8] = 9;
  CHECK_THROWS_AS(deserialize_model(version), DataError);
  CHECK_THROWS_AS(load_model(dir / "missing.zsid"), DataError);
}
