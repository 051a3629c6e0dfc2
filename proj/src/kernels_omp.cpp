// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/kernels.hpp"

#include <cmath>
#include <cstdint>

namespace attnreg::kernels {

namespace {

// Below this many scalar operations a parallel region costs more than it saves.
constexpr std::int64_t kParallelWork = 1 << 14;

inline void softmax_row(const double* x, double* y, std::size_t cols, double scale) {
  double mx = x[0] * scale;
  for (std::size_t j = 1; j < cols; ++j) mx = std::fmax(mx, x[j] * scale);
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] * scale - mx);
    sum += y[j];
  }
  for (std::size_t j = 0; j < cols; ++j) y[j] /= sum;
}

}  // namespace

void softmax_rows(std::span<const double> in, std::span<double> out, std::size_t rows,
                  std::size_t cols, double scale) {
  const auto n = static_cast<std::int64_t>(rows);
  const bool par = n * static_cast<std::int64_t>(cols) >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t r = 0; r < n; ++r) {
    softmax_row(in.data() + r * cols, out.data() + r * cols, cols, scale);
  }
}

void softmax_rows_backward(std::span<const double> p, std::span<const double> g,
                           std::span<double> dz, std::size_t rows, std::size_t cols,
                           double scale) {
  const auto n = static_cast<std::int64_t>(rows);
  const bool par = n * static_cast<std::int64_t>(cols) >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t r = 0; r < n; ++r) {
    const double* pr = p.data() + r * cols;
    const double* gr = g.data() + r * cols;
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += pr[j] * gr[j];
    double* out = dz.data() + r * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] = scale * pr[j] * (gr[j] - dot);
  }
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(m);
  const bool par = rows * static_cast<std::int64_t>(k * n) >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* ar = a.data() + i * k;
    double* cr = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += ar[l] * b[l * n + j];
      cr[j] = acc;
    }
  }
}

void weighted_sum(std::span<const double> basis, std::span<const double> weights,
                  std::span<double> out, std::size_t count, std::size_t cells) {
  const auto n = static_cast<std::int64_t>(cells);
  const bool par = n * static_cast<std::int64_t>(count) >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t c = 0; c < n; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < count; ++k) acc += weights[k] * basis[k * cells + c];
    out[c] = acc;
  }
}

void project(std::span<const double> basis, std::span<const double> v, std::span<double> out,
             std::size_t count, std::size_t cells) {
  const auto n = static_cast<std::int64_t>(count);
  const bool par = n * static_cast<std::int64_t>(cells) >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t k = 0; k < n; ++k) {
    const double* bk = basis.data() + k * cells;
    double acc = 0.0;
    for (std::size_t c = 0; c < cells; ++c) acc += bk[c] * v[c];
    out[k] = acc;
  }
}

}  // namespace attnreg::kernels
