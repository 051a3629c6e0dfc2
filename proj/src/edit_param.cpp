// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/edit_param.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <utility>

#include "attnreg/error.hpp"
#include "attnreg/kernels.hpp"

namespace attnreg {

Matrix gaussian_kernel(int x0, int y0, int sigma, int w) {
  require(w >= 1, "gaussian_kernel: w must be >= 1");
  require(sigma >= 1, "gaussian_kernel: sigma must be >= 1");
  require(x0 >= 1 && x0 <= w && y0 >= 1 && y0 <= w,
          "gaussian_kernel: centre (" + std::to_string(x0) + "," + std::to_string(y0) +
              ") outside 1.." + std::to_string(w));
  Matrix g(static_cast<std::size_t>(w), static_cast<std::size_t>(w));
  const double denom = 2.0 * sigma * sigma;
  for (int i = 1; i <= w; ++i) {
    for (int j = 1; j <= w; ++j) {
      const double di = i - y0;
      const double dj = j - x0;
      g(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)) =
          std::exp(-(di * di + dj * dj) / denom);
    }
  }
  return g;
}

GaussianBasis GaussianBasis::make(int w, int sigma) {
  require(sigma >= 1, "GaussianBasis: sigma must be >= 1");
  require(w >= 2 && w % (2 * sigma) == 0,
          "GaussianBasis: 2*sigma=" + std::to_string(2 * sigma) + " does not divide w=" +
              std::to_string(w));
  GaussianBasis b;
  b.w = w;
  b.sigma = sigma;
  b.r = w / (2 * sigma);
  b.kernels.reserve(b.count() * b.cells());
  for (int p = 1; p <= b.r; ++p) {
    for (int q = 1; q <= b.r; ++q) {
      const Matrix g = gaussian_kernel(2 * sigma * p, 2 * sigma * q, sigma, w);
      b.kernels.insert(b.kernels.end(), g.data.begin(), g.data.end());
    }
  }
  return b;
}

std::shared_ptr<const GaussianBasis> cached_basis(int w, int sigma) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const GaussianBasis>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{w, sigma}];
  if (!slot) slot = std::make_shared<const GaussianBasis>(GaussianBasis::make(w, sigma));
  return slot;
}

int default_sigma(int w) {
  require(w >= 2 && w % 2 == 0, "default_sigma: grid side must be even, got " + std::to_string(w));
  int sigma = std::max(1, w / 8);
  while (sigma > 1 && w % (2 * sigma) != 0) --sigma;
  return sigma;
}

EditParams EditParams::zeros(const GaussianBasis& basis, int layer_id, int token_index) {
  return EditParams{Matrix(static_cast<std::size_t>(basis.r), static_cast<std::size_t>(basis.r)),
                    basis.sigma, layer_id, token_index};
}

Matrix build_perturbation(const EditParams& params, const GaussianBasis& basis) {
  require(params.sigma == basis.sigma, "build_perturbation: sigma does not match basis");
  require(params.theta.rows == static_cast<std::size_t>(basis.r) &&
              params.theta.cols == static_cast<std::size_t>(basis.r),
          "build_perturbation: theta is " + std::to_string(params.theta.rows) + "x" +
              std::to_string(params.theta.cols) + ", basis needs r=" + std::to_string(basis.r));
  Matrix s(static_cast<std::size_t>(basis.w), static_cast<std::size_t>(basis.w));
  kernels::weighted_sum(basis.kernels, params.theta.data, s.data, basis.count(), basis.cells());
  return s;
}

Matrix perturbation_full(std::size_t cells, std::size_t tokens, std::span<const std::size_t> targets,
                         std::span<const Matrix> S) {
  require(targets.size() == S.size(), "perturbation_full: one S grid per target required");
  Matrix full(cells, tokens);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const std::size_t t = targets[k];
    require(t < tokens, "perturbation_full: target " + std::to_string(t) + " out of range");
    require(S[k].rows * S[k].cols == cells, "perturbation_full: S grid size mismatch");
    for (std::size_t i = 0; i < cells; ++i) full(i, t) = S[k].data[i];
  }
  return full;
}

AttentionMap apply_perturbation(const LogitBlock& logits, const Matrix& s_full) {
  require(s_full.rows == logits.cells() && s_full.cols == logits.tokens(),
          "apply_perturbation: S_full shape mismatch");
  LogitBlock shifted = logits;
  const std::size_t per_head = s_full.data.size();
  for (std::size_t h = 0; h < logits.heads(); ++h) {
    double* z = shifted.logits.data.data() + h * per_head;
    for (std::size_t k = 0; k < per_head; ++k) z[k] += s_full.data[k];
  }
  return compute_attention(shifted);
}

AttentionMap apply_edit(const LogitBlock& logits, std::span<const Matrix> S,
                        std::span<const std::size_t> targets) {
  return apply_perturbation(logits,
                            perturbation_full(logits.cells(), logits.tokens(), targets, S));
}

}  // namespace attnreg
