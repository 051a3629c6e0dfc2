// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/kernels.hpp"

#include <cmath>

namespace attnreg::reference {

void softmax_rows(std::span<const double> in, std::span<double> out, std::size_t rows,
                  std::size_t cols, double scale) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * cols;
    double* y = out.data() + r * cols;
    double mx = x[0] * scale;
    for (std::size_t j = 1; j < cols; ++j) mx = std::fmax(mx, x[j] * scale);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] * scale - mx);
      sum += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= sum;
  }
}

void softmax_rows_backward(std::span<const double> p, std::span<const double> g,
                           std::span<double> dz, std::size_t rows, std::size_t cols,
                           double scale) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* pr = p.data() + r * cols;
    const double* gr = g.data() + r * cols;
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += pr[j] * gr[j];
    for (std::size_t j = 0; j < cols; ++j) dz[r * cols + j] = scale * pr[j] * (gr[j] - dot);
  }
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      c[i * n + j] = acc;
    }
  }
}

void weighted_sum(std::span<const double> basis, std::span<const double> weights,
                  std::span<double> out, std::size_t count, std::size_t cells) {
  for (std::size_t c = 0; c < cells; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < count; ++k) acc += weights[k] * basis[k * cells + c];
    out[c] = acc;
  }
}

void project(std::span<const double> basis, std::span<const double> v, std::span<double> out,
             std::size_t count, std::size_t cells) {
  for (std::size_t k = 0; k < count; ++k) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cells; ++c) acc += basis[k * cells + c] * v[c];
    out[k] = acc;
  }
}

}  // namespace attnreg::reference
