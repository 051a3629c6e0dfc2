// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"

#include "attnreg/error.hpp"
#include "attnreg/objective.hpp"
#include "attnreg/optimizer.hpp"
#include "attnreg/rng.hpp"
#include "attnreg/suites.hpp"
#include "oracles/goldens.hpp"
#include "test_util.hpp"

using namespace attnreg;

namespace {

RegulationConfig golden_config() {
  RegulationConfig c;
  c.targets = {1, 3};
  return c;
}

std::vector<EditParams> golden_params(const RegulationProblem& p) {
  std::vector<EditParams> params = p.zero_params();
  params[0].theta = testutil::matrix(goldens::kEditTheta1, 2, 2);
  params[1].theta = testutil::matrix(goldens::kEditTheta3, 2, 2);
  return params;
}

}  // namespace

TEST_CASE("quantile is nearest-rank lower") {
  const std::span<const double> v(goldens::kQuantileValues);
  const QuantilePick p90 = quantile(v, 0.9);
  CHECK(p90.value == goldens::kQuantile90);
  CHECK(p90.index == goldens::kQuantile90Index);
  CHECK(p90.sorted_rank == 56);
  CHECK(quantile(v, 0.5).index == goldens::kQuantile50Index);
  CHECK(quantile(v, 0.1).value == goldens::kQuantile10);

  const std::vector<double> four = {0.4, 0.1, 0.3, 0.2};
  CHECK(quantile(four, 0.9).value == 0.3);  // floor(0.9 * 3) = 2
  const std::vector<double> ties = {0.5, 0.5, 0.5};
  CHECK(quantile(ties, 0.9).index == 1);
  CHECK(quantile_margin(ties, quantile(ties, 0.9)) == 0.0);
}

TEST_CASE("quantile rejects bad input") {
  const std::vector<double> empty;
  CHECK_THROWS_AS(quantile(empty, 0.5), std::invalid_argument);
  const std::vector<double> one = {1.0};
  CHECK_THROWS_AS(quantile(one, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(quantile(one, 0.0), std::invalid_argument);
}

TEST_CASE("error on a hand-built map") {
  const Matrix avg = testutil::matrix(goldens::kHandMap, 4, 3);
  RegulationConfig c;
  c.targets = {1, 2};
  CHECK(error_E(avg, c) == doctest::Approx(goldens::kHandErrorE).epsilon(1e-15));
  c.alpha = 0.0;
  CHECK(error_E(avg, c) == doctest::Approx(goldens::kHandErrorEAlpha0).epsilon(1e-15));
  c.targets = {};
  CHECK_THROWS_AS(error_E(avg, c), std::invalid_argument);
  c.targets = {1, 1};
  CHECK_THROWS_AS(error_E(avg, c), std::invalid_argument);
  c.targets = {3};
  CHECK_THROWS_AS(error_E(avg, c), std::invalid_argument);
}

TEST_CASE("total loss matches the reference values") {
  const LogitBlock z = make_logits(testutil::tensor(goldens::kEditLogits, 2, 16, 4), 4);
  const RegulationProblem p(z, golden_config());
  CHECK(p.basis().r == 2);
  const LossTerms t = p.terms(golden_params(p));
  CHECK(t.total == doctest::Approx(goldens::kEditTotalLoss).epsilon(1e-13));
  CHECK(t.error == doctest::Approx(goldens::kEditErrorE).epsilon(1e-13));
  CHECK(p.loss(p.zero_params()) == doctest::Approx(goldens::kOriginalTotalLoss).epsilon(1e-13));
}

TEST_CASE("analytic gradient agrees with central differences") {
  const LogitBlock z = make_logits(testutil::tensor(goldens::kEditLogits, 2, 16, 4), 4);
  const RegulationProblem p(z, golden_config());
  CHECK(gradient_rel_error(p, golden_params(p), 1e-5) < 1e-7);
}

TEST_CASE("flat objective has an exactly zero gradient") {
  // Uniform attention already meets both goals: every column sums to M/N
  // (mu = 1/N) and every quantile equals 1/N (q_target = 1/N).
  const LogitBlock z = make_logits(Tensor3(1, 16, 4), 4);
  RegulationConfig c;
  c.targets = {1, 2};
  c.mu = 0.25;
  c.q_target = 0.25;
  const RegulationProblem p(z, c);
  const LossGradient g = p.gradient(p.zero_params());
  CHECK(g.terms.error == 0.0);
  for (const Matrix& m : g.dtheta) {
    for (double v : m.data) CHECK(v == 0.0);
  }
}

TEST_CASE("gradcheck report skips quantile ties") {
  const GradcheckReport r = run_gradcheck(5, 1);
  CHECK(r.completed == 5);
  CHECK(r.max_rel_error < 1e-4);
  for (const auto& t : r.trials) {
    if (t.skipped) CHECK(t.rel_error == 0.0);
  }
}

TEST_CASE("problem validates params") {
  const LogitBlock z = random_logits(2, 1, 4, 4, 4);
  RegulationConfig c;
  c.targets = {1, 2};
  const RegulationProblem p(z, c);
  auto params = p.zero_params();
  std::swap(params[0], params[1]);
  CHECK_THROWS_AS(p.loss(params), std::invalid_argument);
  params.pop_back();
  CHECK_THROWS_AS(p.loss(params), std::invalid_argument);
  c.beta = -1.0;
  CHECK_THROWS_WITH_AS(RegulationProblem(z, c), doctest::Contains("beta"), std::invalid_argument);
}

TEST_CASE("optimizer with no iterations returns the zero edit") {
  const SuppressedInstance inst = suppressed_instance(13);
  RegulationConfig c = inst.config;
  c.max_iters = 0;
  const OptResult r = optimize(inst.logits, c);
  CHECK(r.final_loss == r.initial_loss);
  CHECK(r.a_star.values == compute_attention(inst.logits).values);
  for (const auto& p : r.best_params) {
    for (double v : p.theta.data) CHECK(v == 0.0);
  }
}

TEST_CASE("optimizer never returns a worse iterate") {
  for (std::uint64_t seed = 13; seed < 18; ++seed) {
    const SuppressedInstance inst = suppressed_instance(seed);
    const OptResult r = optimize(inst.logits, inst.config);
    CHECK(r.final_loss <= r.initial_loss);
    CHECK(r.a_star.is_row_stochastic(1e-12));
    double best = r.state.loss_history.front();
    for (double l : r.state.loss_history) best = std::min(best, l);
    CHECK(r.final_loss == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("one step moves against the gradient") {
  const SuppressedInstance inst = suppressed_instance(14);
  const RegulationProblem p(inst.logits, inst.config);
  OptState s;
  s.params = p.zero_params();
  const LossGradient g = p.gradient(s.params);
  const OptState next = optimize_step(p, s, 0.5);
  CHECK(next.iter == 1);
  CHECK(next.loss_history.size() == 1);
  CHECK(next.params[0].theta.data[0] == doctest::Approx(-0.5 * g.dtheta[0].data[0]));
}

TEST_CASE("optimizer stops on a plateau") {
  const LogitBlock z = make_logits(Tensor3(1, 16, 4), 4);
  RegulationConfig c;
  c.targets = {1, 2};
  c.mu = 0.25;
  c.q_target = 0.25;
  const OptResult r = optimize(z, c);
  CHECK(r.plateaued);
  CHECK(r.state.iter < c.max_iters);
}

TEST_CASE("divergence guard throws") {
  const SuppressedInstance inst = suppressed_instance(15);
  RegulationConfig c = inst.config;
  c.eta = 1e6;
  c.divergence_factor = 1.0 + 1e-9;
  CHECK_THROWS_AS(optimize(inst.logits, c), DivergenceError);
}
