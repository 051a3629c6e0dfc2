// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "attnreg/regulation_config.hpp"
#include "attnreg/run_record.hpp"
#include "attnreg/schedule.hpp"
#include "attnreg/toy_diffusion.hpp"

namespace attnreg {

struct PromptInfo {
  std::size_t eos_index = 0;
  std::ptrdiff_t pad_index = -1;  // first PAD position, -1 if none
};

PromptInfo prompt_info(std::span<const int> ids);

/// Hook running the configured regulator on one layer:
///   optimize: gradient descent on theta, then EMA + decay of the edit
///   scaling:  closed-form scale/inject, then map-space EMA + decay
/// Events are appended to `events`; `schedule` is shared across layers of
/// one run and must outlive the hook.
AttentionHook make_regulator_hook(const RegulationConfig& config, PromptInfo info,
                                  ScheduleState& schedule, std::vector<RegulationEvent>& events);

}  // namespace attnreg
