// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include <vector>

#include "doctest.h"

#include "attnreg/edit_param.hpp"
#include "attnreg/rng.hpp"
#include "attnreg/suites.hpp"
#include "oracles/goldens.hpp"
#include "test_util.hpp"

using namespace attnreg;

TEST_CASE("gaussian kernel matches the reference values") {
  const Matrix g = gaussian_kernel(3, 5, 2, 8);
  CHECK(testutil::max_rel_diff(g.data, goldens::kKernelExpected) < 1e-15);
  // Peak at row y0, column x0 (1-based).
  CHECK(g(4, 2) == 1.0);
}

TEST_CASE("gaussian kernel rejects bad arguments") {
  CHECK_THROWS_AS(gaussian_kernel(0, 1, 1, 4), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_kernel(1, 5, 1, 4), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_kernel(1, 1, 0, 4), std::invalid_argument);
}

TEST_CASE("basis lattice and sigma choice") {
  CHECK(default_sigma(2) == 1);
  CHECK(default_sigma(8) == 1);
  CHECK(default_sigma(16) == 2);
  CHECK(default_sigma(64) == 8);
  CHECK(default_sigma(24) == 3);
  CHECK(default_sigma(40) == 5);
  CHECK_THROWS_AS(default_sigma(7), std::invalid_argument);

  const GaussianBasis b = GaussianBasis::make(8, 2);
  CHECK(b.r == 2);
  CHECK(b.count() == 4);
  // Kernel (p=2, q=1) is centred at column 8, row 4.
  const auto k = b.kernel(2);
  CHECK(k[3 * 8 + 7] == 1.0);
  CHECK_THROWS_AS(GaussianBasis::make(8, 3), std::invalid_argument);
  CHECK(cached_basis(8, 2).get() == cached_basis(8, 2).get());
}

TEST_CASE("perturbation matches the reference values") {
  const auto basis = cached_basis(8, 1);
  EditParams p = EditParams::zeros(*basis, 0, 1);
  p.theta = testutil::matrix(goldens::kPerturbTheta, 4, 4);
  const Matrix s = build_perturbation(p, *basis);
  CHECK(testutil::max_rel_diff(s.data, goldens::kPerturbExpected) < 1e-14);
}

TEST_CASE("perturbation is linear in theta") {
  const auto basis = cached_basis(16, 2);
  Rng rng(4);
  EditParams a = EditParams::zeros(*basis, 0, 1), b = a, sum = a;
  for (std::size_t k = 0; k < a.theta.data.size(); ++k) {
    a.theta.data[k] = rng.normal();
    b.theta.data[k] = rng.normal();
    sum.theta.data[k] = 2.0 * a.theta.data[k] - 3.0 * b.theta.data[k];
  }
  const Matrix sa = build_perturbation(a, *basis);
  const Matrix sb = build_perturbation(b, *basis);
  const Matrix ss = build_perturbation(sum, *basis);
  for (std::size_t k = 0; k < ss.data.size(); ++k) {
    CHECK(ss.data[k] == doctest::Approx(2.0 * sa.data[k] - 3.0 * sb.data[k]).epsilon(1e-12));
  }
  const Matrix zero = build_perturbation(EditParams::zeros(*basis, 0, 1), *basis);
  for (double v : zero.data) CHECK(v == 0.0);
}

TEST_CASE("perturbation shape errors") {
  const auto basis = cached_basis(8, 1);
  EditParams p = EditParams::zeros(*basis, 0, 1);
  p.theta = Matrix(3, 3);
  CHECK_THROWS_AS(build_perturbation(p, *basis), std::invalid_argument);
  p = EditParams::zeros(*cached_basis(8, 2), 0, 1);
  CHECK_THROWS_AS(build_perturbation(p, *basis), std::invalid_argument);
}

TEST_CASE("edited attention matches the reference values") {
  const LogitBlock z = make_logits(testutil::tensor(goldens::kEditLogits, 2, 16, 4), 4);
  const auto basis = cached_basis(4, 1);
  EditParams p1 = EditParams::zeros(*basis, 0, 1), p3 = EditParams::zeros(*basis, 0, 3);
  p1.theta = testutil::matrix(goldens::kEditTheta1, 2, 2);
  p3.theta = testutil::matrix(goldens::kEditTheta3, 2, 2);
  const std::vector<Matrix> S = {build_perturbation(p1, *basis), build_perturbation(p3, *basis)};
  const std::vector<std::size_t> targets = {1, 3};
  const AttentionMap a = apply_edit(z, S, targets);
  CHECK(testutil::max_rel_diff(a.values.data, goldens::kEditExpected) < 1e-14);
  CHECK(a.is_row_stochastic(1e-12));
}

TEST_CASE("zero edit reproduces the original map exactly") {
  const LogitBlock z = random_logits(8, 2, 8, 5, 8);
  const std::vector<Matrix> S = {Matrix(8, 8), Matrix(8, 8)};
  const std::vector<std::size_t> targets = {1, 2};
  CHECK(apply_edit(z, S, targets).values == compute_attention(z).values);
}

TEST_CASE("perturbation_full places grids in target columns") {
  Matrix g(2, 2, 1.5);
  const std::vector<Matrix> S = {g};
  const std::vector<std::size_t> targets = {2};
  const Matrix full = perturbation_full(4, 3, targets, S);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(full(i, 0) == 0.0);
    CHECK(full(i, 2) == 1.5);
  }
  const std::vector<std::size_t> bad = {3};
  CHECK_THROWS_AS(perturbation_full(4, 3, bad, S), std::invalid_argument);
  const std::vector<std::size_t> two = {0, 1};
  CHECK_THROWS_AS(perturbation_full(4, 3, two, S), std::invalid_argument);
}
