// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/regulation_config.hpp"

#include "attnreg/error.hpp"

namespace attnreg {

void RegulationConfig::validate() const {
  require(beta >= 0.0, "beta must be >= 0");
  require(alpha >= 0.0, "alpha must be >= 0");
  require(mu > 0.0 && mu < 1.0, "mu must lie in (0,1)");
  require(q_level > 0.0 && q_level < 1.0, "q_level must lie in (0,1)");
  require(epsilon > 0.0, "epsilon must be > 0");
  require(eta >= 0.0, "eta must be >= 0");
  require(max_iters >= 0, "max_iters must be >= 0");
  require(tol > 0.0, "tol must be > 0");
  require(plateau_window >= 1, "plateau_window must be >= 1");
  require(divergence_factor > 1.0, "divergence_factor must be > 1");
  require(kappa_ema >= 0.0 && kappa_ema <= 1.0, "kappa_ema must lie in [0,1]");
  require(lambda > 0.0 && lambda <= 1.0, "lambda must lie in (0,1]");
  require(t_thres >= 0, "t_thres must be >= 0");
  require(tau >= 1.0, "tau must be >= 1");
  require(kappa_eos >= 0.0, "kappa_eos must be >= 0");
  require(layer_count >= 0, "layer_count must be >= 0");
}

std::string to_string(RegulatorKind kind) {
  switch (kind) {
    case RegulatorKind::none: return "none";
    case RegulatorKind::optimize: return "optimize";
    case RegulatorKind::scaling: return "scaling";
  }
  return "none";
}

RegulatorKind regulator_from_string(const std::string& name) {
  if (name == "none") return RegulatorKind::none;
  if (name == "optimize") return RegulatorKind::optimize;
  if (name == "scaling") return RegulatorKind::scaling;
  fail("unknown regulator '" + name + "' (expected none|optimize|scaling)");
}

std::string to_string(ScheduleSpace space) {
  return space == ScheduleSpace::logit ? "logit" : "map";
}

ScheduleSpace schedule_space_from_string(const std::string& name) {
  if (name == "logit") return ScheduleSpace::logit;
  if (name == "map") return ScheduleSpace::map;
  fail("unknown schedule_space '" + name + "' (expected logit|map)");
}

}  // namespace attnreg
