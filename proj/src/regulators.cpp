// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/regulators.hpp"

#include "attnreg/error.hpp"
#include "attnreg/legacy_scaler.hpp"
#include "attnreg/optimizer.hpp"

namespace attnreg {

PromptInfo prompt_info(std::span<const int> ids) {
  PromptInfo info;
  bool have_eos = false;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] == kEosId && !have_eos) {
      info.eos_index = k;
      have_eos = true;
    }
    if (ids[k] == kPadId && info.pad_index < 0) info.pad_index = static_cast<std::ptrdiff_t>(k);
  }
  require(have_eos, "prompt has no EOS token");
  return info;
}

AttentionHook make_regulator_hook(const RegulationConfig& config, PromptInfo info,
                                  ScheduleState& schedule, std::vector<RegulationEvent>& events) {
  config.validate();
  return [config, info, &schedule, &events](int step, int layer,
                                            const LogitBlock& logits) -> AttentionMap {
    AttentionMap original = compute_attention(logits);
    // Past the cutoff the edit is off, so skip the work entirely.
    if (step >= config.t_thres) return original;

    if (config.regulator == RegulatorKind::scaling) {
      const AttentionMap scaled = regulate_attention_scaling(
          original, config.targets, info.eos_index, info.pad_index, config.tau, config.kappa_eos);
      ema_update(schedule, layer, scaled, config.kappa_ema);
      events.push_back({step, layer, 0.0, 0.0, 0});
      return apply_schedule(original, schedule, layer, config.lambda, step, config.t_thres);
    }

    const RegulationProblem problem(logits, config);
    OptResult res;
    try {
      res = optimize(problem);
    } catch (const DivergenceError&) {
      const double l0 = problem.loss(problem.zero_params());
      events.push_back({step, layer, l0, l0, 0, true});
      if (config.schedule_space == ScheduleSpace::map) {
        return apply_schedule(original, schedule, layer, config.lambda, step, config.t_thres);
      }
      return apply_edit_schedule(logits, original, schedule, layer, config.lambda, step,
                                 config.t_thres);
    }
    events.push_back({step, layer, res.initial_loss, res.final_loss, res.state.iter});
    if (config.schedule_space == ScheduleSpace::map) {
      ema_update(schedule, layer, res.a_star, config.kappa_ema);
      return apply_schedule(original, schedule, layer, config.lambda, step, config.t_thres);
    }
    ema_update_edit(schedule, layer, res.s_full, config.kappa_ema);
    return apply_edit_schedule(logits, original, schedule, layer, config.lambda, step,
                               config.t_thres);
  };
}

}  // namespace attnreg
