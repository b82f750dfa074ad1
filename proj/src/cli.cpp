// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/cli.hpp"

#include <charconv>
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "zsid/artifact.hpp"
#include "zsid/errors.hpp"
#include "zsid/hash.hpp"
#include "zsid/projection.hpp"
#include "zsid/synthetic.hpp"
#include "zsid/training.hpp"

namespace zsid {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string pct(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", 100.0 * v);
  return buf;
}

void write_file(const fs::path& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw DataError("failed writing " + path.string());
}

std::string with_checksum(std::string csv, const std::string& checksum) {
  return csv + "# artifact_checksum=" + checksum + "\n";
}

/// Records what a command is about to compute; written before the work
/// starts and rewritten with output checksums when it finishes.
class Manifest {
 public:
  Manifest(fs::path dir, std::string command, const std::string& config_path, const TrainConfig& cfg,
           std::vector<std::uint64_t> seeds)
      : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    doc_["command"] = std::move(command);
    doc_["config_path"] = config_path;
    ordered_json resolved = ordered_json::object();
    for (const auto& [k, v] : config_entries(cfg)) resolved[k] = v;
    doc_["config"] = resolved;
    doc_["seeds"] = seeds;
    doc_["output_dir"] = dir_.string();
    doc_["outputs"] = ordered_json::object();
    flush();
  }

  void set(const std::string& key, ordered_json value) {
    doc_[key] = std::move(value);
    flush();
  }

  /// Writes a file into the output directory and records its checksum.
  void output(const std::string& name, std::string_view text) {
    write_file(dir_ / name, text);
    doc_["outputs"][name] = checksum_hex(text);
    flush();
  }

  const fs::path& dir() const { return dir_; }

 private:
  void flush() { write_file(dir_ / "manifest.json", doc_.dump(2) + "\n"); }

  fs::path dir_;
  ordered_json doc_;
};

struct TrainOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string ablate;
  std::vector<std::string> overrides;
};

TrainConfig resolve_config(const TrainOptions& o) {
  TrainConfig cfg = load_config(o.config);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1), fs::current_path());
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.ablate.empty()) cfg = ablation_variant(cfg, parse_ablation(o.ablate));
  validate(cfg);
  return cfg;
}

std::string trace_csv(const std::vector<EpochStats>& trace) {
  std::string csv = "epoch,loss,suid,accuracy\n";
  for (std::size_t e = 0; e < trace.size(); ++e)
    csv += std::to_string(e + 1) + "," + num(trace[e].loss) + "," + num(trace[e].suid) + "," +
           num(trace[e].accuracy) + "\n";
  return csv;
}

EpochCallback progress(std::ostream& err, std::size_t epochs) {
  return [&err, epochs](std::size_t epoch, const EpochStats& s) {
    err << "epoch " << epoch << "/" << epochs << " loss=" << num(s.loss) << " suid=" << num(s.suid)
        << " accuracy=" << num(s.accuracy) << "\n";
  };
}

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = resolve_config(o);
  Manifest manifest(o.out, "train", o.config, cfg, {cfg.seed});
  const TrainedModel model = train(cfg, progress(err, cfg.epochs));
  const std::string bytes = serialize_model(model);
  manifest.output("model.zsid", bytes);
  const std::string checksum = checksum_hex(bytes);
  manifest.output("loss_trace.csv", with_checksum(trace_csv(model.trace), checksum));
  out << "model " << (manifest.dir() / "model.zsid").string() << " checksum " << checksum << "\n";
  return 0;
}

struct ModelOptions {
  std::string model;
  std::string out;
  std::string split;
  bool two_stage = false;
  std::string kind = "ss";
  std::string mode = "gzsl";
  std::string format = "csv";
};

struct LoadedModel {
  TrainedModel model;
  std::string checksum;
};

LoadedModel load(const std::string& path) {
  if (!fs::exists(path)) throw DataError("model artifact not found: " + path);
  return {load_model(path), file_checksum(path)};
}

SplitMode split_for(const ModelOptions& o, const TrainedModel& m) {
  return o.split.empty() ? m.config.split.mode : split_mode_from_string(o.split);
}

int cmd_eval(const ModelOptions& o, std::ostream& out) {
  const LoadedModel lm = load(o.model);
  const SplitMode mode = split_for(o, lm.model);
  check_evaluation(lm.model, mode, o.two_stage);
  Manifest manifest(o.out, "eval", o.model, lm.model.config, {lm.model.config.seed});
  manifest.set("split", std::string(to_string(mode)));
  manifest.set("two_stage", o.two_stage);
  manifest.set("model_checksum", lm.checksum);
  const PreparedData data = prepare_data(lm.model.config, mode);
  const Evaluation ev = evaluate(lm.model, data.split.test, mode, o.two_stage);
  const std::string report = report_csv(ev.report);
  manifest.output("report.csv", with_checksum(report, lm.checksum));
  std::string preds = "id,gold,predicted,route\n";
  const LabelSet& labels = lm.model.meta.labels;
  for (std::size_t i = 0; i < ev.items.size(); ++i)
    preds += csv_cell(ev.items[i].id) + "," + csv_cell(labels.name(ev.gold[i])) + "," +
             csv_cell(labels.name(ev.predictions[i].label)) + "," + std::string(to_string(ev.predictions[i].route)) +
             "\n";
  manifest.output("predictions.csv", with_checksum(preds, lm.checksum));
  out << report;
  return 0;
}

int cmd_export_sim(const ModelOptions& o, std::ostream& out) {
  const LoadedModel lm = load(o.model);
  const TrainedModel& m = lm.model;
  const SimilarityMode mode = similarity_mode_from_string(o.mode);
  if (o.kind != "ss" && o.kind != "es") throw ConfigError("--kind must be ss or es");
  if (o.format != "csv" && o.format != "svg") throw ConfigError("--format must be csv or svg");
  if (mode == SimilarityMode::zsl && m.spec.unseen == 0) throw ConfigError("the model has no unseen intents");
  Manifest manifest(o.out, "export-sim", o.model, m.config, {m.config.seed});
  manifest.set("kind", o.kind);
  manifest.set("mode", o.mode);
  manifest.set("model_checksum", lm.checksum);
  const Tensor matrix =
      o.kind == "ss" ? build_similarity_matrix(m.representations.vectors, m.spec.seen, mode, m.config.similarity)
                     : embedding_similarity_baseline(m.meta, m.table, mode, m.config.similarity);
  const auto rows = m.meta.labels.all();
  const auto cols = similarity_columns(m.meta.labels, mode);
  const std::string stem = "similarity_" + o.kind + "_" + o.mode;
  manifest.output(stem + ".csv", with_checksum(similarity_csv(matrix, rows, cols), lm.checksum));
  if (o.format == "svg") manifest.output(stem + ".svg", similarity_svg(matrix, rows, cols));
  out << (manifest.dir() / (stem + ".csv")).string() << "\n";
  return 0;
}

int cmd_dump_reps(const ModelOptions& o, std::ostream& out) {
  const LoadedModel lm = load(o.model);
  const SplitMode mode = split_for(o, lm.model);
  Manifest manifest(o.out, "dump-reps", o.model, lm.model.config, {lm.model.config.seed});
  manifest.set("split", std::string(to_string(mode)));
  manifest.set("model_checksum", lm.checksum);
  const PreparedData data = prepare_data(lm.model.config, mode);
  const auto& items = data.split.test;
  if (items.empty()) throw DataError("evaluation split is empty");
  const Predictor predictor(lm.model);
  Tensor reps({items.size(), lm.model.spec.extractor.hidden_dim});
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto r = predictor.representation(items[i].tokens);
    std::copy(r.begin(), r.end(), reps.row(i).begin());
  }
  const Projection p = project_2d(reps);
  std::string csv = "id,gold,x,y\n";
  for (std::size_t i = 0; i < items.size(); ++i)
    csv += csv_cell(items[i].id) + "," + csv_cell(items[i].label) + "," + num(p.points.at(i, 0)) + "," +
           num(p.points.at(i, 1)) + "\n";
  manifest.output("representations.csv", with_checksum(csv, lm.checksum));
  out << (manifest.dir() / "representations.csv").string() << "\n";
  return 0;
}

struct RunScore {
  double accuracy = 0.0;
  double f1 = 0.0;
};

/// One train + eval on the config's own split; overall scores for gzsid,
/// unseen scores for zsid.
RunScore train_and_score(const TrainConfig& cfg, const PreparedData& data, std::uint64_t& checksum) {
  const TrainedModel model = train(cfg, data);
  checksum = fnv1a(serialize_model(model), checksum);
  const Evaluation ev = evaluate(model, data.split.test, cfg.split.mode, cfg.two_stage);
  const MicroScores& s = cfg.split.mode == SplitMode::gzsid ? *ev.report.overall : *ev.report.unseen;
  return {s.accuracy, s.f1};
}

struct SweepOptions {
  TrainOptions train;
  std::string param;
  std::vector<double> grid;
  std::vector<std::uint64_t> seeds;
};

std::vector<std::uint64_t> seeds_for(const SweepOptions& o, const TrainConfig& cfg) {
  return o.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : o.seeds;
}

int cmd_sweep(const SweepOptions& o, std::ostream& out, std::ostream& err) {
  const TrainConfig base = resolve_config(o.train);
  if (o.param != "alpha" && o.param != "lambda_prime") throw ConfigError("--param must be alpha or lambda_prime");
  if (o.grid.empty()) throw ConfigError("--grid needs at least one value");
  const auto seeds = seeds_for(o, base);
  Manifest manifest(o.train.out, "sweep", o.train.config, base, seeds);
  manifest.set("parameter", o.param);
  manifest.set("grid", o.grid);
  const PreparedData data = prepare_data(base);
  std::string csv = o.param + ",accuracy,f1\n";
  std::uint64_t checksum = fnv1a("");
  for (double value : o.grid) {
    RunScore mean;
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      set_config_value(cfg, o.param, num(value));
      cfg = ablation_variant(cfg, cfg.ablate);
      const RunScore s = train_and_score(cfg, data, checksum);
      mean.accuracy += s.accuracy / static_cast<double>(seeds.size());
      mean.f1 += s.f1 / static_cast<double>(seeds.size());
    }
    err << o.param << "=" << num(value) << " accuracy=" << pct(mean.accuracy) << " f1=" << pct(mean.f1) << "\n";
    csv += num(value) + "," + pct(mean.accuracy) + "," + pct(mean.f1) + "\n";
  }
  manifest.output("sweep.csv", with_checksum(csv, hex64(checksum)));
  out << csv;
  return 0;
}

int cmd_ablate(const SweepOptions& o, std::ostream& out, std::ostream& err) {
  const TrainConfig base = resolve_config(o.train);
  const auto seeds = seeds_for(o, base);
  Manifest manifest(o.train.out, "ablate", o.train.config, base, seeds);
  const PreparedData data = prepare_data(base);
  std::string csv = "variant,accuracy,f1\n";
  std::uint64_t checksum = fnv1a("");
  for (const char* variant : {"none", "no-mt", "no-ss", "es"}) {
    RunScore mean;
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      cfg = ablation_variant(cfg, parse_ablation(variant));
      const RunScore s = train_and_score(cfg, data, checksum);
      mean.accuracy += s.accuracy / static_cast<double>(seeds.size());
      mean.f1 += s.f1 / static_cast<double>(seeds.size());
    }
    const std::string name = std::string(variant) == "none" ? "full" : variant;
    err << name << " accuracy=" << pct(mean.accuracy) << " f1=" << pct(mean.f1) << "\n";
    csv += name + "," + pct(mean.accuracy) + "," + pct(mean.f1) + "\n";
  }
  manifest.output("ablation.csv", with_checksum(csv, hex64(checksum)));
  out << csv;
  return 0;
}

struct SyntheticOptions {
  std::string out;
  std::uint64_t seed = 0;
  bool ambiguous = false;
};

int cmd_make_synthetic(const SyntheticOptions& o, std::ostream& out) {
  const SyntheticSpec spec = o.ambiguous ? ambiguous_synthetic_spec(o.seed) : [&] {
    SyntheticSpec s;
    s.seed = o.seed;
    return s;
  }();
  write_synthetic(spec, o.out);
  TrainConfig cfg;
  cfg.dataset = "dataset.jsonl";
  cfg.labels = "labels.json";
  cfg.embeddings = "embeddings.txt";
  cfg.hidden_dim = 32;
  cfg.channels = 16;
  cfg.attention_dim = 16;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.adam.learning_rate = 5e-3;
  cfg.lof_k = 10;
  write_file(fs::path(o.out) / "config.txt", config_text(cfg));
  out << "synthetic corpus written to " << o.out << "\n";
  return 0;
}

void add_train_options(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--config", o.config, "Config file (key = value lines)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory")->required();
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--ablate", o.ablate, "Comma list of no-mt, no-ss, es");
  cmd->add_option("--set", o.overrides, "Override a config key (key=value); repeatable");
}

void add_model_options(CLI::App* cmd, ModelOptions& o) {
  cmd->add_option("--model", o.model, "Model artifact")->required();
  cmd->add_option("--out", o.out, "Output directory")->required();
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot and generalized zero-shot intent detection"};
  app.require_subcommand(1);

  TrainOptions train_o;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write its artifact");
  add_train_options(train_cmd, train_o);

  ModelOptions eval_o;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on its test split");
  add_model_options(eval_cmd, eval_o);
  eval_cmd->add_option("--split", eval_o.split, "zsid or gzsid (default: the training split mode)");
  eval_cmd->add_flag("--two-stage", eval_o.two_stage, "Route through the outlier-detection first stage");

  ModelOptions sim_o;
  auto* sim_cmd = app.add_subcommand("export-sim", "Export a similarity matrix");
  add_model_options(sim_cmd, sim_o);
  sim_cmd->add_option("--kind", sim_o.kind, "ss (learned representations) or es (label-name embeddings)");
  sim_cmd->add_option("--mode", sim_o.mode, "zsl or gzsl");
  sim_cmd->add_option("--format", sim_o.format, "csv, or svg for an additional heatmap");

  ModelOptions reps_o;
  auto* reps_cmd = app.add_subcommand("dump-reps", "Project test-utterance representations to 2-D");
  add_model_options(reps_cmd, reps_o);
  reps_cmd->add_option("--split", reps_o.split, "zsid or gzsid (default: the training split mode)");

  SweepOptions sweep_o;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate across a coefficient grid");
  add_train_options(sweep_cmd, sweep_o.train);
  sweep_cmd->add_option("--param", sweep_o.param, "alpha or lambda_prime")->required();
  sweep_cmd->add_option("--grid", sweep_o.grid, "Comma-separated values")->required()->delimiter(',');
  sweep_cmd->add_option("--seeds", sweep_o.seeds, "Comma-separated seeds; scores are averaged")->delimiter(',');

  SweepOptions ablate_o;
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare the full model with the no-mt, no-ss and es variants");
  add_train_options(ablate_cmd, ablate_o.train);
  ablate_cmd->add_option("--seeds", ablate_o.seeds, "Comma-separated seeds; scores are averaged")->delimiter(',');

  SyntheticOptions syn_o;
  auto* syn_cmd = app.add_subcommand("make-synthetic", "Write a Gaussian-cluster corpus with a matching config");
  syn_cmd->add_option("--out", syn_o.out, "Output directory")->required();
  syn_cmd->add_option("--seed", syn_o.seed, "Generator seed");
  syn_cmd->add_flag("--ambiguous", syn_o.ambiguous, "Overlap each seen intent with an unseen one");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  kernels::apply_thread_cap();
  if (*train_cmd) return cmd_train(train_o, out, err);
  if (*eval_cmd) return cmd_eval(eval_o, out);
  if (*sim_cmd) return cmd_export_sim(sim_o, out);
  if (*reps_cmd) return cmd_dump_reps(reps_o, out);
  if (*sweep_cmd) return cmd_sweep(sweep_o, out, err);
  if (*ablate_cmd) return cmd_ablate(ablate_o, out, err);
  return cmd_make_synthetic(syn_o, out);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(argc, argv, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return 3;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace zsid
