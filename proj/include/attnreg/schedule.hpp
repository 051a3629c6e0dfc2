// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "attnreg/attention.hpp"
#include "attnreg/tensor.hpp"

namespace attnreg {

/// Per-generation temporal state of the edits, keyed by layer id.
struct ScheduleState {
  std::map<int, AttentionMap> ema;  // map-space EMA of optimized maps
  std::map<int, Matrix> edit_ema;   // logit-space EMA of the perturbation S_full
  int step = 0;

  void reset() {
    ema.clear();
    edit_ema.clear();
    step = 0;
  }
};

/// A_EMA <- kappa*A_EMA + (1-kappa)*A*; the first update for a layer stores A*.
void ema_update(ScheduleState& state, int layer, const AttentionMap& a_star, double kappa);

/// Convex blend lambda^t*A_EMA + (1-lambda^t)*A_orig while t < t_thres and an
/// EMA exists for the layer; otherwise a copy of A_orig.
AttentionMap apply_schedule(const AttentionMap& a_orig, const ScheduleState& state, int layer,
                            double lambda, int t, int t_thres);

/// Logit-space counterpart of ema_update, smoothing the perturbation itself.
void ema_update_edit(ScheduleState& state, int layer, const Matrix& s_star, double kappa);

/// softmax((QK^T + lambda^t * S_EMA)/sqrt(d)) while t < t_thres and an EMA
/// exists; otherwise a copy of A_orig. A zero perturbation reproduces A_orig
/// bit-for-bit.
AttentionMap apply_edit_schedule(const LogitBlock& logits, const AttentionMap& a_orig,
                                 const ScheduleState& state, int layer, double lambda, int t,
                                 int t_thres);

enum class LayerTag { down, mid, up };

struct LayerDescriptor {
  int id = 0;
  LayerTag tag = LayerTag::down;
  int side = 0;
  std::string name;
};

/// Layers to edit, in network order. k = 2 is the default pair {last down,
/// first up}; larger k expands outward from the bottleneck, alternating
/// down/up (down first); k = 0 selects nothing.
std::vector<int> select_layers(std::span<const LayerDescriptor> layout, int k = 2);

}  // namespace attnreg
