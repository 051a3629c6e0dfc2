// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace attnreg {

enum class RegulatorKind { none, optimize, scaling };

/// Where the EMA and decay of the edit are carried.
///   logit: smooth the additive logit perturbation S and re-softmax, so a
///          zero edit reproduces the original map bit-for-bit.
///   map:   smooth the optimized attention maps and convex-blend them with
///          the original map.
enum class ScheduleSpace { logit, map };

struct RegulationConfig {
  // Objective.
  double beta = 0.1;
  double alpha = 1.0;
  double mu = 0.2;
  double q_level = 0.9;
  double q_target = 0.9;
  double epsilon = 1e-12;  // smoothing inside the proximity norm

  // Optimizer.
  double eta = 1.0;
  int max_iters = 20;
  double tol = 1e-4;
  int plateau_window = 3;
  double divergence_factor = 10.0;

  // Schedule.
  double kappa_ema = 0.5;
  double lambda = 0.95;
  int t_thres = 25;
  ScheduleSpace schedule_space = ScheduleSpace::logit;

  // Scaling regulator.
  double tau = 1.1;
  double kappa_eos = 0.5;

  // Run-level selection.
  RegulatorKind regulator = RegulatorKind::optimize;
  std::vector<std::size_t> targets;
  std::vector<int> edit_layers;  // explicit layer ids; overrides layer_count
  int layer_count = 2;           // symmetric expansion from the bottleneck; 0 edits nothing

  /// Range checks; throws std::invalid_argument naming the field.
  void validate() const;

  bool operator==(const RegulationConfig&) const = default;
};

std::string to_string(RegulatorKind kind);
RegulatorKind regulator_from_string(const std::string& name);
std::string to_string(ScheduleSpace space);
ScheduleSpace schedule_space_from_string(const std::string& name);

}  // namespace attnreg
