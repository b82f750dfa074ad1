// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference vs OpenMP variant for each parallel kernel, plus one
// training epoch at 1 thread and at the configured thread count.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "support/fixtures.hpp"
#include "zsid/inference.hpp"
#include "zsid/kernels.hpp"

using namespace zsid;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = d(rng);
  return t;
}

kernels::Exec exec_of(const benchmark::State& s) {
  return s.range(0) == 0 ? kernels::Exec::serial : kernels::Exec::parallel;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(1));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(exec_of(state), a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->ArgsProduct({{0, 1}, {64, 256}})->ArgNames({"parallel", "n"});

void BM_PairwiseDistances(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(1));
  const Tensor x = random_tensor({n, 100}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::pairwise_sq_dist(exec_of(state), x, x));
}
BENCHMARK(BM_PairwiseDistances)->ArgsProduct({{0, 1}, {256, 1024}})->ArgNames({"parallel", "n"});

void BM_Lof(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(1));
  const Tensor pts = random_tensor({n, 16}, 4), queries = random_tensor({200, 16}, 5);
  for (auto _ : state) {
    const LofModel lof(pts, 20, exec_of(state));
    benchmark::DoNotOptimize(lof.scores(queries, exec_of(state)));
  }
}
BENCHMARK(BM_Lof)->ArgsProduct({{0, 1}, {500, 2000}})->ArgNames({"parallel", "n"})->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  const auto dir = zsid::testing::scratch_dir("bench");
  TrainConfig cfg = zsid::testing::synthetic_config(dir);
  cfg.epochs = 1;
  cfg.batch_size = 64;
  cfg.method = static_cast<Method>(state.range(1));
  const PreparedData data = prepare_data(cfg);
  const int threads = state.range(0) == 0 ? 1 : kernels::configured_threads();
  omp_set_num_threads(threads);
  for (auto _ : state) benchmark::DoNotOptimize(train(cfg, data));
  kernels::apply_thread_cap();
  state.counters["threads"] = threads;
}
BENCHMARK(BM_TrainEpoch)->ArgsProduct({{0, 1}, {0, 1, 2, 3}})->ArgNames({"parallel", "method"})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
