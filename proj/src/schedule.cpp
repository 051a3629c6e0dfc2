// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "attnreg/edit_param.hpp"
#include "attnreg/error.hpp"

namespace attnreg {

namespace {

void check_lambda(double lambda) {
  require(lambda > 0.0 && lambda <= 1.0, "schedule: lambda must lie in (0,1]");
}

bool edit_active(int t, int t_thres) {
  require(t >= 0, "schedule: step index must be >= 0");
  return t < t_thres;
}

}  // namespace

void ema_update(ScheduleState& state, int layer, const AttentionMap& a_star, double kappa) {
  require(kappa >= 0.0 && kappa <= 1.0, "ema_update: kappa must lie in [0,1]");
  require(a_star.is_row_stochastic(1e-9), "ema_update: A* is not row-stochastic");
  auto it = state.ema.find(layer);
  if (it == state.ema.end()) {
    state.ema.emplace(layer, a_star);
    return;
  }
  AttentionMap& ema = it->second;
  require(ema.values.same_shape(a_star.values), "ema_update: shape changed for layer " +
                                                    std::to_string(layer));
  // Written so kappa = 0 and kappa = 1 reproduce A* and A_EMA exactly.
  for (std::size_t k = 0; k < ema.values.data.size(); ++k) {
    ema.values.data[k] = kappa * ema.values.data[k] + (1.0 - kappa) * a_star.values.data[k];
  }
}

AttentionMap apply_schedule(const AttentionMap& a_orig, const ScheduleState& state, int layer,
                            double lambda, int t, int t_thres) {
  check_lambda(lambda);
  auto it = state.ema.find(layer);
  if (!edit_active(t, t_thres) || it == state.ema.end()) return a_orig;
  const AttentionMap& ema = it->second;
  require(ema.values.same_shape(a_orig.values), "apply_schedule: EMA shape mismatch");
  const double wt = std::pow(lambda, t);
  AttentionMap out = a_orig;
  for (std::size_t k = 0; k < out.values.data.size(); ++k) {
    out.values.data[k] = wt * ema.values.data[k] + (1.0 - wt) * a_orig.values.data[k];
  }
  return out;
}

void ema_update_edit(ScheduleState& state, int layer, const Matrix& s_star, double kappa) {
  require(kappa >= 0.0 && kappa <= 1.0, "ema_update_edit: kappa must lie in [0,1]");
  auto it = state.edit_ema.find(layer);
  if (it == state.edit_ema.end()) {
    state.edit_ema.emplace(layer, s_star);
    return;
  }
  Matrix& ema = it->second;
  require(ema.same_shape(s_star), "ema_update_edit: shape changed for layer " +
                                      std::to_string(layer));
  for (std::size_t k = 0; k < ema.data.size(); ++k) {
    ema.data[k] = kappa * ema.data[k] + (1.0 - kappa) * s_star.data[k];
  }
}

AttentionMap apply_edit_schedule(const LogitBlock& logits, const AttentionMap& a_orig,
                                 const ScheduleState& state, int layer, double lambda, int t,
                                 int t_thres) {
  check_lambda(lambda);
  auto it = state.edit_ema.find(layer);
  if (!edit_active(t, t_thres) || it == state.edit_ema.end()) return a_orig;
  Matrix s = it->second;
  const double wt = std::pow(lambda, t);
  for (double& v : s.data) v *= wt;
  return apply_perturbation(logits, s);
}

std::vector<int> select_layers(std::span<const LayerDescriptor> layout, int k) {
  require(!layout.empty(), "select_layers: empty layout");
  require(k >= 0, "select_layers: k must be >= 0");
  std::vector<const LayerDescriptor*> downs;
  std::vector<const LayerDescriptor*> ups;
  for (const auto& l : layout) {
    if (l.tag == LayerTag::down) downs.push_back(&l);
    if (l.tag == LayerTag::up) ups.push_back(&l);
  }
  require(static_cast<std::size_t>(k) <= downs.size() + ups.size(),
          "select_layers: k=" + std::to_string(k) + " exceeds the " +
              std::to_string(downs.size() + ups.size()) + " down/up layers");

  std::vector<int> chosen;
  auto d = downs.rbegin();
  auto u = ups.begin();
  bool take_down = true;
  while (static_cast<int>(chosen.size()) < k) {
    if (take_down && d != downs.rend()) {
      chosen.push_back((*d++)->id);
    } else if (!take_down && u != ups.end()) {
      chosen.push_back((*u++)->id);
    } else if (d != downs.rend()) {
      chosen.push_back((*d++)->id);
    } else {
      chosen.push_back((*u++)->id);
    }
    take_down = !take_down;
  }

  // Back to network order.
  std::vector<int> ordered;
  for (const auto& l : layout) {
    if (std::find(chosen.begin(), chosen.end(), l.id) != chosen.end()) ordered.push_back(l.id);
  }
  return ordered;
}

}  // namespace attnreg
