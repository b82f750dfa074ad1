// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "zsid/synthetic.hpp"
#include "zsid/training.hpp"

namespace zsid::testing {

/// Fresh per-process directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("zsid-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Small-dimension config over a freshly written synthetic corpus.
inline TrainConfig synthetic_config(const std::filesystem::path& dir, const SyntheticSpec& spec = {}) {
  write_synthetic(spec, dir);
  TrainConfig c;
  c.dataset = dir / "dataset.jsonl";
  c.labels = dir / "labels.json";
  c.embeddings = dir / "embeddings.txt";
  c.hidden_dim = 32;
  c.channels = 16;
  c.attention_dim = 16;
  c.capsule.capsule_dim = 8;
  c.epochs = 20;
  c.batch_size = 16;
  c.adam.learning_rate = 5e-3;
  c.lof_k = 10;
  return c;
}

}  // namespace zsid::testing
