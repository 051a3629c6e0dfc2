// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "attnreg/tensor.hpp"

namespace attnreg {

/// Raw cross-attention scores Q·K^T for one layer: heads x M spatial cells x
/// N tokens, with M = w*w. The softmax temperature is sqrt(d).
struct LogitBlock {
  Tensor3 logits;
  int d = 1;
  int layer_id = 0;
  int w = 1;

  std::size_t heads() const { return logits.heads; }
  std::size_t cells() const { return logits.rows; }
  std::size_t tokens() const { return logits.cols; }

  /// Checks shape metadata and finiteness; throws naming the first bad entry.
  void validate() const;
};

/// Row-stochastic attention weights with the same layout as LogitBlock.
struct AttentionMap {
  Tensor3 values;
  int d = 1;
  int layer_id = 0;
  int w = 1;

  std::size_t heads() const { return values.heads; }
  std::size_t cells() const { return values.rows; }
  std::size_t tokens() const { return values.cols; }

  /// Largest |row sum - 1| over all heads and rows.
  double max_row_deviation() const;
  /// True when entries lie in [0,1] and every row sums to 1 within tol.
  bool is_row_stochastic(double tol = 1e-9) const;
};

/// One token's attention column viewed as a w x w grid.
struct TokenMap2D {
  Matrix grid;
  int token_index = 0;
};

LogitBlock make_logits(Tensor3 logits, int d, int layer_id = 0);

/// softmax(logits / sqrt(d)) per head and spatial row.
AttentionMap compute_attention(const LogitBlock& logits);

/// Per-head product A_h · V. `values` is N x d_v; result is H x M x d_v.
Tensor3 attention_output(const AttentionMap& a, const Matrix& values);

/// Row-major reshape of column `token` of head `head` into a w x w grid.
TokenMap2D unravel(const AttentionMap& a, std::size_t head, std::size_t token);

/// Inverse of unravel: grid back to a length-M column.
std::vector<double> flatten(const TokenMap2D& map);

/// Mean over heads: the M x N map the objective is evaluated on.
Matrix head_average(const AttentionMap& a);

/// Integer side of a square grid with `cells` entries, or 0 when not square.
int grid_side(std::size_t cells);

}  // namespace attnreg
