// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "attnreg/attention.hpp"
#include "attnreg/tensor.hpp"

namespace attnreg {

/// One regulator invocation (layer, step) as seen by the optimizer.
struct RegulationEvent {
  int step = 0;
  int layer = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  bool diverged = false;  // optimizer aborted; the layer kept its previous schedule state
};

struct RunTiming {
  double total_seconds = 0.0;
  double regulation_seconds = 0.0;
  double denoiser_seconds = 0.0;
};

/// Everything one generation produces. Statistics are for the conditional
/// branch and describe the attention actually used in the forward pass.
struct RunRecord {
  int steps = 0;
  int heads = 0;
  int tokens = 0;
  std::vector<int> layer_ids;        // network order
  std::vector<int> edited_layers;    // subset regulated in this run
  std::vector<int> prompt_ids;       // full padded token sequence
  std::vector<std::size_t> targets;  // token positions

  // Indexed [step][layer slot][head][token].
  std::vector<double> stat_max;
  std::vector<double> stat_sum;

  int latent_channels = 0;
  int latent_side = 0;
  std::vector<std::vector<double>> latents;  // x after each step, channel-major
  std::map<int, AttentionMap> final_maps;    // per layer at the last step
  std::vector<std::map<int, AttentionMap>> debug_maps;  // per step, only when requested

  std::vector<RegulationEvent> events;
  RunTiming timing;

  std::size_t slot(int layer) const;
  std::size_t stat_index(int step, std::size_t layer_slot, int head, int token) const {
    return ((static_cast<std::size_t>(step) * layer_ids.size() + layer_slot) *
                static_cast<std::size_t>(heads) +
            static_cast<std::size_t>(head)) *
               static_cast<std::size_t>(tokens) +
           static_cast<std::size_t>(token);
  }
  double max_at(int step, int layer, int head, int token) const {
    return stat_max[stat_index(step, slot(layer), head, token)];
  }
  double sum_at(int step, int layer, int head, int token) const {
    return stat_sum[stat_index(step, slot(layer), head, token)];
  }
  const std::vector<double>& final_latent() const { return latents.back(); }
};

}  // namespace attnreg
