// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/attention.hpp"

#include <cmath>
#include <string>

#include "attnreg/error.hpp"
#include "attnreg/kernels.hpp"

namespace attnreg {

int grid_side(std::size_t cells) {
  const auto w = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(cells))));
  return w * w == cells ? static_cast<int>(w) : 0;
}

void LogitBlock::validate() const {
  require(logits.heads >= 1, "LogitBlock: need at least one head");
  require(logits.cols >= 1, "LogitBlock: need at least one token");
  require(d >= 1, "LogitBlock: key dimension d must be >= 1");
  require(w >= 1 && static_cast<std::size_t>(w) * static_cast<std::size_t>(w) == logits.rows,
          "LogitBlock: M=" + std::to_string(logits.rows) + " is not w*w for w=" +
              std::to_string(w));
  require(logits.data.size() == logits.heads * logits.rows * logits.cols,
          "LogitBlock: storage does not match shape");
  for (std::size_t h = 0; h < logits.heads; ++h) {
    for (std::size_t i = 0; i < logits.rows; ++i) {
      for (double v : logits.row(h, i)) {
        if (!std::isfinite(v)) {
          throw NumericError("non-finite logit at layer " + std::to_string(layer_id) + " head " +
                             std::to_string(h) + " row " + std::to_string(i));
        }
      }
    }
  }
}

LogitBlock make_logits(Tensor3 logits, int d, int layer_id) {
  const int w = grid_side(logits.rows);
  LogitBlock block{std::move(logits), d, layer_id, w};
  require(w > 0, "make_logits: M is not a perfect square");
  block.validate();
  return block;
}

double AttentionMap::max_row_deviation() const {
  double worst = 0.0;
  for (std::size_t h = 0; h < values.heads; ++h) {
    for (std::size_t i = 0; i < values.rows; ++i) {
      double s = 0.0;
      for (double v : values.row(h, i)) s += v;
      worst = std::fmax(worst, std::fabs(s - 1.0));
    }
  }
  return worst;
}

bool AttentionMap::is_row_stochastic(double tol) const {
  for (double v : values.data) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
  }
  return max_row_deviation() <= tol;
}

AttentionMap compute_attention(const LogitBlock& logits) {
  logits.validate();
  const Tensor3& z = logits.logits;
  AttentionMap out{Tensor3(z.heads, z.rows, z.cols), logits.d, logits.layer_id, logits.w};
  kernels::softmax_rows(z.data, out.values.data, z.heads * z.rows, z.cols,
                        1.0 / std::sqrt(static_cast<double>(logits.d)));
  return out;
}

Tensor3 attention_output(const AttentionMap& a, const Matrix& values) {
  require(values.rows == a.tokens(),
          "attention_output: V has " + std::to_string(values.rows) + " rows, map has " +
              std::to_string(a.tokens()) + " tokens");
  Tensor3 out(a.heads(), a.cells(), values.cols);
  const std::size_t per_head_in = a.cells() * a.tokens();
  const std::size_t per_head_out = a.cells() * values.cols;
  for (std::size_t h = 0; h < a.heads(); ++h) {
    kernels::matmul(std::span<const double>(a.values.data).subspan(h * per_head_in, per_head_in),
                    values.data, std::span<double>(out.data).subspan(h * per_head_out, per_head_out),
                    a.cells(), a.tokens(), values.cols);
  }
  return out;
}

TokenMap2D unravel(const AttentionMap& a, std::size_t head, std::size_t token) {
  require(head < a.heads(), "unravel: head " + std::to_string(head) + " out of range");
  require(token < a.tokens(), "unravel: token " + std::to_string(token) + " out of range");
  const auto w = static_cast<std::size_t>(a.w);
  require(w * w == a.cells(), "unravel: map is not square");
  TokenMap2D m{Matrix(w, w), static_cast<int>(token)};
  for (std::size_t i = 0; i < a.cells(); ++i) m.grid.data[i] = a.values(head, i, token);
  return m;
}

std::vector<double> flatten(const TokenMap2D& map) { return map.grid.data; }

Matrix head_average(const AttentionMap& a) {
  Matrix avg(a.cells(), a.tokens());
  const double inv = 1.0 / static_cast<double>(a.heads());
  for (std::size_t h = 0; h < a.heads(); ++h) {
    for (std::size_t i = 0; i < a.cells(); ++i) {
      for (std::size_t n = 0; n < a.tokens(); ++n) avg(i, n) += a.values(h, i, n);
    }
  }
  for (double& v : avg.data) v *= inv;
  return avg;
}

}  // namespace attnreg
