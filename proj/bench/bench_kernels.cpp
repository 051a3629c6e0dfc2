// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

// OpenMP kernels against the serial reference on layer-sized problems.

#include <vector>

#include <benchmark/benchmark.h>

#include "attnreg/kernels.hpp"
#include "attnreg/optimizer.hpp"
#include "attnreg/rng.hpp"
#include "attnreg/suites.hpp"

namespace {

using namespace attnreg;

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// Args: spatial cells M (rows per head), tokens N; 8 heads.
template <auto Softmax>
void softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0)) * 8;
  const auto cols = static_cast<std::size_t>(state.range(1));
  const auto in = normals(rows * cols, 1);
  std::vector<double> out(rows * cols);
  for (auto _ : state) {
    Softmax(in, out, rows, cols, 0.125);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * cols));
}

template <auto Backward>
void softmax_backward(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0)) * 8;
  const auto cols = static_cast<std::size_t>(state.range(1));
  const auto p = normals(rows * cols, 2);
  const auto g = normals(rows * cols, 3);
  std::vector<double> dz(rows * cols);
  for (auto _ : state) {
    Backward(p, g, dz, rows, cols, 0.125);
    benchmark::DoNotOptimize(dz.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * cols));
}

// Args: m, k (n = 77, a text-encoder length).
template <auto Matmul>
void matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const std::size_t n = 77;
  const auto a = normals(m * k, 4);
  const auto b = normals(k * n, 5);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Matmul(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * k * n));
}

// Args: basis count r*r, grid side w.
template <auto WeightedSum>
void weighted_sum(benchmark::State& state) {
  const auto count = static_cast<std::size_t>(state.range(0));
  const auto cells = static_cast<std::size_t>(state.range(1) * state.range(1));
  const auto basis = normals(count * cells, 6);
  const auto w = normals(count, 7);
  std::vector<double> out(cells);
  for (auto _ : state) {
    WeightedSum(basis, w, out, count, cells);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(count * cells));
}

// Whole regulator solve on one 64x64 layer, 8 heads, 77 tokens.
void optimize_layer(benchmark::State& state) {
  const LogitBlock z = random_logits(9, 8, 64, 77, 40, 0);
  RegulationConfig cfg;
  cfg.targets = {2, 5};
  cfg.max_iters = static_cast<int>(state.range(0));
  const RegulationProblem problem(z, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(optimize(problem).final_loss);
}

}  // namespace

BENCHMARK(softmax<&kernels::softmax_rows>)->Name("softmax/omp")->Args({1024, 77})->Args({4096, 77});
BENCHMARK(softmax<&reference::softmax_rows>)->Name("softmax/serial")->Args({1024, 77})->Args({4096, 77});
BENCHMARK(softmax_backward<&kernels::softmax_rows_backward>)->Name("softmax_backward/omp")->Args({4096, 77});
BENCHMARK(softmax_backward<&reference::softmax_rows_backward>)->Name("softmax_backward/serial")->Args({4096, 77});
BENCHMARK(matmul<&kernels::matmul>)->Name("matmul/omp")->Args({4096, 40});
BENCHMARK(matmul<&reference::matmul>)->Name("matmul/serial")->Args({4096, 40});
BENCHMARK(weighted_sum<&kernels::weighted_sum>)->Name("weighted_sum/omp")->Args({64, 64});
BENCHMARK(weighted_sum<&reference::weighted_sum>)->Name("weighted_sum/serial")->Args({64, 64});
BENCHMARK(optimize_layer)->Arg(5)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
