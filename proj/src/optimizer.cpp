// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/optimizer.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "attnreg/error.hpp"

namespace attnreg {

OptState optimize_step(const RegulationProblem& problem, OptState state, double eta) {
  const LossGradient grad = problem.gradient(state.params);
  state.loss_history.push_back(grad.terms.total);
  for (std::size_t k = 0; k < state.params.size(); ++k) {
    auto& theta = state.params[k].theta.data;
    const auto& g = grad.dtheta[k].data;
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= eta * g[j];
  }
  ++state.iter;
  return state;
}

namespace {

[[noreturn]] void diverged(const RegulationProblem& problem, const OptState& state) {
  std::ostringstream msg;
  msg << "optimizer diverged on layer " << problem.logits().layer_id << " after " << state.iter
      << " iterations; loss history:";
  for (double l : state.loss_history) msg << ' ' << l;
  throw DivergenceError(msg.str());
}

}  // namespace

OptResult optimize(const RegulationProblem& problem) {
  const RegulationConfig& cfg = problem.config();
  OptResult result;
  result.state.params = problem.zero_params();
  result.best_params = result.state.params;
  double best_loss = std::numeric_limits<double>::infinity();

  // Every visited theta is scored once; the lowest-loss one is kept so the
  // result never does worse than theta = 0.
  auto score = [&](const std::vector<EditParams>& params, double loss) {
    if (loss > cfg.divergence_factor * result.state.loss_history.front()) {
      diverged(problem, result.state);
    }
    if (loss < best_loss) {
      best_loss = loss;
      result.best_params = params;
    }
  };

  while (result.state.iter < cfg.max_iters) {
    std::vector<EditParams> before = result.state.params;
    result.state = optimize_step(problem, std::move(result.state), cfg.eta);
    score(before, result.state.loss_history.back());
    const auto& hist = result.state.loss_history;
    const auto w = static_cast<std::size_t>(cfg.plateau_window);
    if (hist.size() > w) {
      const double prev = hist[hist.size() - 1 - w];
      if (prev - hist.back() < cfg.tol * std::fabs(prev)) {
        result.plateaued = true;
        break;
      }
    }
  }

  // The last iterate has not been scored yet.
  const double last = problem.loss(result.state.params);
  if (!std::isfinite(last)) throw NumericError("optimizer: non-finite loss at final iterate");
  result.state.loss_history.push_back(last);
  score(result.state.params, last);

  result.s_full = problem.perturbation(result.best_params);
  result.a_star = apply_perturbation(problem.logits(), result.s_full);
  result.initial_loss = result.state.loss_history.front();
  result.initial_terms = problem.terms(problem.zero_params());
  result.final_terms = evaluate_terms(result.a_star, problem.original(), cfg);
  result.final_loss = result.final_terms.total;
  return result;
}

OptResult optimize(const LogitBlock& logits, const RegulationConfig& config) {
  return optimize(RegulationProblem(logits, config));
}

}  // namespace attnreg
