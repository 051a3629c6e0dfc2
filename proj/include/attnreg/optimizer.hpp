// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "attnreg/objective.hpp"

namespace attnreg {

struct OptState {
  std::vector<EditParams> params;  // one per target
  int iter = 0;
  std::vector<double> loss_history;  // loss at each visited theta, in order
};

/// One gradient-descent update theta <- theta - eta * grad for every target.
/// Appends the loss at the pre-step theta. Throws NumericError on a
/// non-finite gradient.
OptState optimize_step(const RegulationProblem& problem, OptState state, double eta);

struct OptResult {
  AttentionMap a_star;
  Matrix s_full;  // logit perturbation that produced a_star
  OptState state;
  std::vector<EditParams> best_params;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  LossTerms initial_terms;
  LossTerms final_terms;
  bool plateaued = false;
};

/// Gradient descent from theta = 0 until max_iters or a plateau (relative
/// improvement below tol across plateau_window steps). Returns the
/// lowest-loss iterate; throws DivergenceError if the loss exceeds
/// divergence_factor times its initial value.
OptResult optimize(const RegulationProblem& problem);
OptResult optimize(const LogitBlock& logits, const RegulationConfig& config);

}  // namespace attnreg
