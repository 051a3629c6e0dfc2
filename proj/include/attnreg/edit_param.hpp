// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "attnreg/attention.hpp"
#include "attnreg/tensor.hpp"

namespace attnreg {

/// w x w Gaussian bump, entry (i,j) = exp(-((i-y0)^2 + (j-x0)^2) / (2 sigma^2)),
/// all coordinates 1-based. Stored zero-based.
Matrix gaussian_kernel(int x0, int y0, int sigma, int w);

/// The r*r fixed kernels centred on the lattice (2σp, 2σq), p,q = 1..r.
/// Kernel k = (p-1)*r + (q-1) pairs with theta(p-1, q-1); p sets the column
/// centre x0 and q the row centre y0.
struct GaussianBasis {
  int w = 0;
  int sigma = 0;
  int r = 0;
  std::vector<double> kernels;  // r*r rows of w*w cells

  static GaussianBasis make(int w, int sigma);

  std::size_t count() const { return static_cast<std::size_t>(r) * static_cast<std::size_t>(r); }
  std::size_t cells() const { return static_cast<std::size_t>(w) * static_cast<std::size_t>(w); }
  std::span<const double> kernel(std::size_t k) const {
    return std::span<const double>(kernels).subspan(k * cells(), cells());
  }
};

/// Shared read-only basis for (w, sigma); built once per process.
std::shared_ptr<const GaussianBasis> cached_basis(int w, int sigma);

/// Default kernel width: max(1, w/8), stepped down until 2σ divides w.
int default_sigma(int w);

/// Learnable weights for one (layer, target token).
struct EditParams {
  Matrix theta;  // r x r
  int sigma = 1;
  int layer_id = 0;
  int token_index = 0;

  static EditParams zeros(const GaussianBasis& basis, int layer_id, int token_index);
};

/// S_t = sum_{p,q} theta(p,q) * G(2σp, 2σq, σ), as a w x w grid.
Matrix build_perturbation(const EditParams& params, const GaussianBasis& basis);

/// M x N additive logit matrix: column targets[k] holds the flattened S[k],
/// every other column is zero.
Matrix perturbation_full(std::size_t cells, std::size_t tokens, std::span<const std::size_t> targets,
                         std::span<const Matrix> S);

/// softmax((QK^T + S_full)/sqrt(d)), the same S_full added to every head.
AttentionMap apply_perturbation(const LogitBlock& logits, const Matrix& s_full);

/// Convenience wrapper: build S_full from per-target grids and apply it.
AttentionMap apply_edit(const LogitBlock& logits, std::span<const Matrix> S,
                        std::span<const std::size_t> targets);

}  // namespace attnreg
