// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "attnreg/error.hpp"
#include "attnreg/kernels.hpp"

namespace attnreg {

QuantilePick quantile(std::span<const double> values, double q) {
  require(!values.empty(), "quantile: empty input");
  require(q > 0.0 && q < 1.0, "quantile: q must lie in (0,1)");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const auto rank = static_cast<std::size_t>(
      std::floor(q * static_cast<double>(values.size() - 1) + 1e-9));
  return {values[order[rank]], order[rank], rank};
}

double quantile_margin(std::span<const double> values, const QuantilePick& pick) {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i != pick.index) gap = std::min(gap, std::fabs(values[i] - pick.value));
  }
  return gap;
}

namespace {

void check_targets(const RegulationConfig& config, std::size_t tokens) {
  require(!config.targets.empty(), "objective: target set is empty");
  for (std::size_t k = 0; k < config.targets.size(); ++k) {
    const std::size_t t = config.targets[k];
    require(t < tokens, "objective: target " + std::to_string(t) + " outside " +
                            std::to_string(tokens) + " tokens");
    for (std::size_t j = 0; j < k; ++j) {
      require(config.targets[j] != t, "objective: duplicate target " + std::to_string(t));
    }
  }
}

// Fills the E-related fields of `terms` from a head-averaged map.
void error_terms(const Matrix& avg, const RegulationConfig& config, LossTerms& terms) {
  check_targets(config, avg.cols);
  const double inv_t = 1.0 / static_cast<double>(config.targets.size());
  const double mass_goal = config.mu * static_cast<double>(avg.rows);
  std::vector<double> column(avg.rows);
  terms.picks.clear();
  terms.column_sums.clear();
  double qsum = 0.0;
  double msum = 0.0;
  for (std::size_t t : config.targets) {
    double s = 0.0;
    for (std::size_t i = 0; i < avg.rows; ++i) {
      column[i] = avg(i, t);
      s += column[i];
    }
    const QuantilePick pick = quantile(column, config.q_level);
    const double dq = pick.value - config.q_target;
    const double dm = s - mass_goal;
    qsum += dq * dq;
    msum += dm * dm;
    terms.picks.push_back(pick);
    terms.column_sums.push_back(s);
  }
  terms.quantile_term = inv_t * qsum;
  terms.mass_term = config.alpha * inv_t * msum;
  terms.error = terms.quantile_term + terms.mass_term;
}

double squared_distance(const Tensor3& a, const Tensor3& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) {
    const double d = a.data[k] - b.data[k];
    acc += d * d;
  }
  return acc;
}

}  // namespace

double error_E(const Matrix& head_avg, const RegulationConfig& config) {
  LossTerms terms;
  error_terms(head_avg, config, terms);
  return terms.error;
}

LossTerms evaluate_terms(const AttentionMap& edited, const AttentionMap& original,
                         const RegulationConfig& config) {
  require(edited.values.same_shape(original.values), "total_loss: map shapes differ");
  LossTerms terms;
  error_terms(head_average(edited), config, terms);
  terms.deviation = std::sqrt(squared_distance(edited.values, original.values) + config.epsilon);
  terms.total = terms.error + config.beta * terms.deviation;
  return terms;
}

double total_loss(const AttentionMap& edited, const AttentionMap& original,
                  const RegulationConfig& config) {
  return evaluate_terms(edited, original, config).total;
}

RegulationProblem::RegulationProblem(LogitBlock logits, RegulationConfig config, int sigma)
    : logits_(std::move(logits)), config_(std::move(config)) {
  config_.validate();
  check_targets(config_, logits_.tokens());
  original_ = compute_attention(logits_);
  basis_ = cached_basis(logits_.w, sigma > 0 ? sigma : default_sigma(logits_.w));
}

std::vector<EditParams> RegulationProblem::zero_params() const {
  std::vector<EditParams> params;
  params.reserve(config_.targets.size());
  for (std::size_t t : config_.targets) {
    params.push_back(EditParams::zeros(*basis_, logits_.layer_id, static_cast<int>(t)));
  }
  return params;
}

void RegulationProblem::check_params(std::span<const EditParams> params) const {
  require(params.size() == config_.targets.size(), "objective: one EditParams per target required");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require(static_cast<std::size_t>(params[k].token_index) == config_.targets[k],
            "objective: params out of target order");
  }
}

Matrix RegulationProblem::perturbation(std::span<const EditParams> params) const {
  check_params(params);
  std::vector<Matrix> grids;
  grids.reserve(params.size());
  for (const EditParams& p : params) grids.push_back(build_perturbation(p, *basis_));
  return perturbation_full(logits_.cells(), logits_.tokens(), config_.targets, grids);
}

AttentionMap RegulationProblem::edited(std::span<const EditParams> params) const {
  return apply_perturbation(logits_, perturbation(params));
}

double RegulationProblem::loss(std::span<const EditParams> params) const {
  return terms(params).total;
}

LossTerms RegulationProblem::terms(std::span<const EditParams> params) const {
  return evaluate_terms(edited(params), original_, config_);
}

LossGradient RegulationProblem::gradient(std::span<const EditParams> params) const {
  const AttentionMap a = edited(params);
  LossGradient out;
  out.terms = evaluate_terms(a, original_, config_);
  LossTerms& terms = out.terms;
  if (!std::isfinite(terms.total)) throw NumericError("objective: non-finite loss");

  const std::size_t H = a.heads();
  const std::size_t M = a.cells();
  const std::size_t N = a.tokens();
  const double inv_t = 1.0 / static_cast<double>(config_.targets.size());
  const double mass_goal = config_.mu * static_cast<double>(M);

  // dL/d(head-averaged map); only target columns are non-zero.
  Matrix d_avg(M, N);
  for (std::size_t k = 0; k < config_.targets.size(); ++k) {
    const std::size_t t = config_.targets[k];
    const double d_mass = 2.0 * config_.alpha * inv_t * (terms.column_sums[k] - mass_goal);
    for (std::size_t i = 0; i < M; ++i) d_avg(i, t) += d_mass;
    d_avg(terms.picks[k].index, t) +=
        2.0 * inv_t * (terms.picks[k].value - config_.q_target);
  }

  // dL/dA' per head.
  Tensor3 g(H, M, N);
  const double inv_h = 1.0 / static_cast<double>(H);
  const double prox = config_.beta / terms.deviation;
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t n = 0; n < N; ++n) {
        g(h, i, n) = inv_h * d_avg(i, n) + prox * (a.values(h, i, n) - original_.values(h, i, n));
      }
    }
  }

  // Through the softmax (with its 1/sqrt(d) scale) to the shared logit shift.
  Tensor3 dz(H, M, N);
  kernels::softmax_rows_backward(a.values.data, g.data, dz.data, H * M, N,
                                 1.0 / std::sqrt(static_cast<double>(a.d)));
  std::vector<double> d_s(M);
  out.dtheta.reserve(config_.targets.size());
  for (std::size_t k = 0; k < config_.targets.size(); ++k) {
    const std::size_t t = config_.targets[k];
    for (std::size_t i = 0; i < M; ++i) {
      double acc = 0.0;
      for (std::size_t h = 0; h < H; ++h) acc += dz(h, i, t);
      d_s[i] = acc;
    }
    Matrix dtheta(static_cast<std::size_t>(basis_->r), static_cast<std::size_t>(basis_->r));
    kernels::project(basis_->kernels, d_s, dtheta.data, basis_->count(), basis_->cells());
    for (double v : dtheta.data) {
      if (!std::isfinite(v)) {
        throw NumericError("objective: non-finite gradient for target " + std::to_string(t) +
                           " (quantile " + std::to_string(terms.quantile_term) + ", mass " +
                           std::to_string(terms.mass_term) + ", deviation " +
                           std::to_string(terms.deviation) + ")");
      }
    }
    out.dtheta.push_back(std::move(dtheta));
  }
  return out;
}

}  // namespace attnreg
