// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Closed-form regulator: scale the dominant token's map down to the average
// peak level and add a fraction of the EOS map to the weakest token, plus a
// checker for the resulting bound on the largest regulated peak.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "attnreg/attention.hpp"

namespace attnreg {

/// How the average peak level I_avg is formed from the target peaks.
///   exclude_dominant: mean over every target except the dominant one.
///   all_targets:      mean over every target (can break the bound).
enum class AvgMode { exclude_dominant, all_targets };

struct ScalerParams {
  double tau = 1.1;
  double kappa_eos = 0.0;
  double i_avg = 0.0;
  double i_p = 0.0;
  double i_eos = 0.0;
  double delta = 0.0;
  std::vector<double> maxima;  // per regulated token
  std::size_t dominant_index = 0;
  std::size_t least_index = 0;

  /// Peak above which the dominant token gets scaled: tau*(I_avg + delta) - tau*I_p.
  double trigger() const { return tau * (i_avg + delta) - tau * i_p; }
  /// max{tau*(I_avg + delta), I_l + kappa*I_EOS}.
  double bound() const;
};

/// Gamma = 1 - i_avg / i_t, so that max(A_t) * (1 - Gamma) = i_avg.
double gamma_for(double i_t, double i_avg);

/// Elementwise multiply by (1 - gamma).
TokenMap2D scale_dominant(const TokenMap2D& a_t, double gamma);

/// A_l + kappa * A_eos.
TokenMap2D inject_eos(const TokenMap2D& a_l, const TokenMap2D& a_eos, double kappa_eos);

double map_max(const TokenMap2D& m);

/// Peaks, dominant/least indices, I_avg and delta for a set of token maps.
/// Needs at least two tokens.
ScalerParams make_scaler_params(std::span<const TokenMap2D> tokens, const TokenMap2D& eos,
                                double i_p, double tau, double kappa_eos,
                                AvgMode mode = AvgMode::exclude_dominant);

struct ScalingOutcome {
  std::vector<TokenMap2D> regulated;
  ScalerParams params;
  bool scaled = false;
  double gamma = 0.0;
};

/// Full scale + inject pass over the regulated tokens.
ScalingOutcome regulate_scaling(std::span<const TokenMap2D> tokens, const TokenMap2D& eos,
                                double i_p, double tau, double kappa_eos,
                                AvgMode mode = AvgMode::exclude_dominant);

struct BoundCheck {
  bool holds = true;
  double m_prime = 0.0;
  double bound = 0.0;
  double slack = 0.0;  // bound - m_prime
  std::size_t witness = 0;  // token attaining m_prime
};

BoundCheck verify_bound(const ScalerParams& params, std::span<const double> regulated_maxima);

struct BoundTrialReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double min_slack = 0.0;
  std::uint64_t first_violation_seed = 0;
  BoundCheck first_violation;
};

/// Randomized check of the bound over `trials` seeded instances; trial i uses
/// seed derive_seed(seed, i) and is independent of scheduling.
BoundTrialReport run_bound_trials(std::size_t trials, std::uint64_t seed, double tau,
                                  double kappa_eos, AvgMode mode = AvgMode::exclude_dominant);

/// Applies the scaling regulator to one layer's attention, head by head, on
/// the given target columns, then renormalizes every row.
AttentionMap regulate_attention_scaling(const AttentionMap& a, std::span<const std::size_t> targets,
                                        std::size_t eos_index, std::ptrdiff_t pad_index, double tau,
                                        double kappa_eos);

}  // namespace attnreg
