// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "attnreg/attention.hpp"
#include "attnreg/edit_param.hpp"
#include "attnreg/regulation_config.hpp"
#include "attnreg/tensor.hpp"

namespace attnreg {

struct QuantilePick {
  double value = 0.0;
  std::size_t index = 0;        // position in the input
  std::size_t sorted_rank = 0;  // position after the ascending sort
};

/// Nearest-rank-lower quantile: the element at sorted position floor(q*(M-1)),
/// ties ordered by original position.
QuantilePick quantile(std::span<const double> values, double q);

/// Smallest distance between the selected quantile element and any other
/// element; selection is locally stable while perturbations stay below it.
double quantile_margin(std::span<const double> values, const QuantilePick& pick);

struct LossTerms {
  double quantile_term = 0.0;
  double mass_term = 0.0;  // already multiplied by alpha
  double error = 0.0;      // quantile_term + mass_term
  double deviation = 0.0;  // sqrt(||A' - A||_F^2 + eps)
  double total = 0.0;      // error + beta * deviation
  std::vector<QuantilePick> picks;   // per target, on the head-averaged column
  std::vector<double> column_sums;   // per target
};

/// Error E on a head-averaged M x N map.
double error_E(const Matrix& head_avg, const RegulationConfig& config);

/// E(A') + beta * sqrt(||A' - A||_F^2 + eps), the norm spanning every head and token.
double total_loss(const AttentionMap& edited, const AttentionMap& original,
                  const RegulationConfig& config);

LossTerms evaluate_terms(const AttentionMap& edited, const AttentionMap& original,
                         const RegulationConfig& config);

struct LossGradient {
  LossTerms terms;
  std::vector<Matrix> dtheta;  // one r x r matrix per target, in target order
};

/// The regulation problem for one layer at one diffusion step: fixed logits,
/// the unedited map, and the Gaussian basis for this grid size.
class RegulationProblem {
 public:
  RegulationProblem(LogitBlock logits, RegulationConfig config, int sigma = 0);

  const LogitBlock& logits() const { return logits_; }
  const AttentionMap& original() const { return original_; }
  const GaussianBasis& basis() const { return *basis_; }
  const RegulationConfig& config() const { return config_; }
  std::span<const std::size_t> targets() const { return config_.targets; }

  /// theta = 0 for every target.
  std::vector<EditParams> zero_params() const;

  /// Additive logit matrix S_full for the given parameters.
  Matrix perturbation(std::span<const EditParams> params) const;
  AttentionMap edited(std::span<const EditParams> params) const;
  double loss(std::span<const EditParams> params) const;
  LossTerms terms(std::span<const EditParams> params) const;

  /// Exact gradient of the total loss. The quantile subgradient is routed to
  /// the single selected cell of each target's head-averaged column.
  LossGradient gradient(std::span<const EditParams> params) const;

 private:
  void check_params(std::span<const EditParams> params) const;

  LogitBlock logits_;
  RegulationConfig config_;
  AttentionMap original_;
  std::shared_ptr<const GaussianBasis> basis_;
};

}  // namespace attnreg
