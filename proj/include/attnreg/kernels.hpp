// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Inner loops shared by the attention, edit and objective modules.
//
// attnreg::kernels is OpenMP-parallel over independent output rows or cells.
// attnreg::reference is the plain serial version kept as the test oracle.
// Each output element is produced by the same serial inner loop in both, so
// results are bit-identical regardless of thread count.

#include <cstddef>
#include <span>

namespace attnreg {

namespace kernels {

/// out[r,:] = softmax(in[r,:] * scale), stabilized by subtracting the row maximum.
void softmax_rows(std::span<const double> in, std::span<double> out, std::size_t rows,
                  std::size_t cols, double scale);

/// Softmax backward: dz[r,j] = scale * p[r,j] * (g[r,j] - sum_k p[r,k] * g[r,k]).
void softmax_rows_backward(std::span<const double> p, std::span<const double> g,
                           std::span<double> dz, std::size_t rows, std::size_t cols,
                           double scale);

/// c (m x n) = a (m x k) * b (k x n).
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);

/// out[c] = sum_k weights[k] * basis[k, c], basis stored count x cells.
void weighted_sum(std::span<const double> basis, std::span<const double> weights,
                  std::span<double> out, std::size_t count, std::size_t cells);

/// out[k] = sum_c basis[k, c] * v[c].
void project(std::span<const double> basis, std::span<const double> v, std::span<double> out,
             std::size_t count, std::size_t cells);

}  // namespace kernels

namespace reference {

/// out[r,:] = softmax(in[r,:] * scale), stabilized by subtracting the row maximum.
void softmax_rows(std::span<const double> in, std::span<double> out, std::size_t rows,
                  std::size_t cols, double scale);

/// Softmax backward: dz[r,j] = scale * p[r,j] * (g[r,j] - sum_k p[r,k] * g[r,k]).
void softmax_rows_backward(std::span<const double> p, std::span<const double> g,
                           std::span<double> dz, std::size_t rows, std::size_t cols,
                           double scale);

/// c (m x n) = a (m x k) * b (k x n).
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);

/// out[c] = sum_k weights[k] * basis[k, c], basis stored count x cells.
void weighted_sum(std::span<const double> basis, std::span<const double> weights,
                  std::span<double> out, std::size_t count, std::size_t cells);

/// out[k] = sum_c basis[k, c] * v[c].
void project(std::span<const double> basis, std::span<const double> v, std::span<double> out,
             std::size_t count, std::size_t cells);

}  // namespace reference

}  // namespace attnreg
