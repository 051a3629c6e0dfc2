// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace attnreg {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Matrix&) const = default;
};

/// Heads x rows x cols block, contiguous with cols fastest.
struct Tensor3 {
  std::size_t heads = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t h, std::size_t r, std::size_t c, double fill = 0.0)
      : heads(h), rows(r), cols(c), data(h * r * c, fill) {}

  std::size_t index(std::size_t h, std::size_t i, std::size_t j) const {
    return (h * rows + i) * cols + j;
  }
  double& operator()(std::size_t h, std::size_t i, std::size_t j) { return data[index(h, i, j)]; }
  double operator()(std::size_t h, std::size_t i, std::size_t j) const {
    return data[index(h, i, j)];
  }

  std::span<double> row(std::size_t h, std::size_t i) {
    return {data.data() + index(h, i, 0), cols};
  }
  std::span<const double> row(std::size_t h, std::size_t i) const {
    return {data.data() + index(h, i, 0), cols};
  }

  bool same_shape(const Tensor3& o) const {
    return heads == o.heads && rows == o.rows && cols == o.cols;
  }
  bool operator==(const Tensor3&) const = default;
};

}  // namespace attnreg
