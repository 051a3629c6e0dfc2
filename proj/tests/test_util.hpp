// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "attnreg/attention.hpp"
#include "attnreg/tensor.hpp"

namespace testutil {

inline attnreg::Tensor3 tensor(std::span<const double> v, std::size_t h, std::size_t r,
                               std::size_t c) {
  attnreg::Tensor3 t(h, r, c);
  t.data.assign(v.begin(), v.end());
  return t;
}

inline attnreg::Matrix matrix(std::span<const double> v, std::size_t r, std::size_t c) {
  attnreg::Matrix m(r, c);
  m.data.assign(v.begin(), v.end());
  return m;
}

// Largest |a - b| / max(1, |b|).
inline double max_rel_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, std::fabs(a[k] - b[k]) / std::max(1.0, std::fabs(b[k])));
  }
  return worst;
}

}  // namespace testutil
