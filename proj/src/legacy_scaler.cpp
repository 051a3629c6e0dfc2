// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/legacy_scaler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "attnreg/error.hpp"
#include "attnreg/rng.hpp"

namespace attnreg {

double ScalerParams::bound() const {
  return std::max(tau * (i_avg + delta), maxima[least_index] + kappa_eos * i_eos);
}

double gamma_for(double i_t, double i_avg) {
  require(i_t > 0.0, "gamma_for: i_t must be > 0");
  require(i_avg > 0.0 && i_avg <= i_t, "gamma_for: need 0 < i_avg <= i_t");
  return 1.0 - i_avg / i_t;
}

TokenMap2D scale_dominant(const TokenMap2D& a_t, double gamma) {
  require(gamma >= 0.0 && gamma <= 1.0, "scale_dominant: gamma must lie in [0,1]");
  TokenMap2D out = a_t;
  const double keep = 1.0 - gamma;
  for (double& v : out.grid.data) v *= keep;
  return out;
}

TokenMap2D inject_eos(const TokenMap2D& a_l, const TokenMap2D& a_eos, double kappa_eos) {
  require(a_l.grid.same_shape(a_eos.grid), "inject_eos: map shapes differ");
  require(kappa_eos >= 0.0, "inject_eos: kappa must be >= 0");
  TokenMap2D out = a_l;
  for (std::size_t k = 0; k < out.grid.data.size(); ++k) {
    out.grid.data[k] += kappa_eos * a_eos.grid.data[k];
  }
  return out;
}

double map_max(const TokenMap2D& m) {
  return *std::max_element(m.grid.data.begin(), m.grid.data.end());
}

ScalerParams make_scaler_params(std::span<const TokenMap2D> tokens, const TokenMap2D& eos,
                                double i_p, double tau, double kappa_eos, AvgMode mode) {
  require(tokens.size() >= 2, "scaler: need at least two tokens (delta undefined otherwise)");
  require(tau >= 1.0, "scaler: tau must be >= 1");
  ScalerParams p;
  p.tau = tau;
  p.kappa_eos = kappa_eos;
  p.i_p = i_p;
  p.i_eos = map_max(eos);
  for (const auto& t : tokens) p.maxima.push_back(map_max(t));

  const auto& I = p.maxima;
  p.dominant_index = static_cast<std::size_t>(std::max_element(I.begin(), I.end()) - I.begin());
  p.least_index = p.dominant_index == 0 ? 1 : 0;
  for (std::size_t k = 0; k < I.size(); ++k) {
    if (k != p.dominant_index && I[k] < I[p.least_index]) p.least_index = k;
  }

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < I.size(); ++k) {
    if (mode == AvgMode::all_targets || k != p.dominant_index) {
      sum += I[k];
      ++count;
    }
  }
  p.i_avg = sum / static_cast<double>(count);

  double spread = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < I.size(); ++k) {
    if (k != p.dominant_index) spread = std::max(spread, I[k] - p.i_avg);
  }
  p.delta = spread + i_p;
  return p;
}

ScalingOutcome regulate_scaling(std::span<const TokenMap2D> tokens, const TokenMap2D& eos,
                                double i_p, double tau, double kappa_eos, AvgMode mode) {
  ScalingOutcome out;
  out.params = make_scaler_params(tokens, eos, i_p, tau, kappa_eos, mode);
  out.regulated.assign(tokens.begin(), tokens.end());
  const ScalerParams& p = out.params;
  const double peak = p.maxima[p.dominant_index];
  if (peak > p.trigger() && p.i_avg > 0.0 && p.i_avg <= peak) {
    out.gamma = gamma_for(peak, p.i_avg);
    out.regulated[p.dominant_index] = scale_dominant(tokens[p.dominant_index], out.gamma);
    out.scaled = true;
  }
  out.regulated[p.least_index] = inject_eos(out.regulated[p.least_index], eos, kappa_eos);
  return out;
}

BoundCheck verify_bound(const ScalerParams& params, std::span<const double> regulated_maxima) {
  require(params.maxima.size() >= 2, "verify_bound: need at least two tokens");
  require(regulated_maxima.size() == params.maxima.size(),
          "verify_bound: one regulated maximum per token required");
  BoundCheck c;
  c.bound = params.bound();
  c.witness = static_cast<std::size_t>(
      std::max_element(regulated_maxima.begin(), regulated_maxima.end()) - regulated_maxima.begin());
  c.m_prime = regulated_maxima[c.witness];
  c.slack = c.bound - c.m_prime;
  // Rounding allowance only; the bound itself is exact.
  c.holds = c.slack >= -1e-12;
  return c;
}

namespace {

BoundCheck one_trial(std::uint64_t seed, double tau, double kappa_eos, AvgMode mode) {
  Rng rng(seed);
  const int w = rng.uniform() < 0.5 ? 4 : 8;
  const std::size_t n_tokens = 2 + rng.below(5);
  const auto cells = static_cast<std::size_t>(w * w);
  auto random_map = [&](double peak) {
    TokenMap2D m{Matrix(static_cast<std::size_t>(w), static_cast<std::size_t>(w)), 0};
    for (double& v : m.grid.data) v = peak * rng.uniform();
    m.grid.data[rng.below(cells)] = peak;
    return m;
  };
  std::vector<TokenMap2D> tokens;
  for (std::size_t k = 0; k < n_tokens; ++k) {
    // Mix of balanced and strongly dominated instances.
    const double peak = rng.uniform() < 0.3 ? rng.uniform(0.5, 1.0) : rng.uniform(0.01, 0.5);
    tokens.push_back(random_map(peak));
  }
  const TokenMap2D eos = random_map(rng.uniform(0.0, 1.0));
  const double i_p = rng.uniform(0.0, 0.2);

  const ScalingOutcome out = regulate_scaling(tokens, eos, i_p, tau, kappa_eos, mode);
  std::vector<double> maxima;
  for (const auto& m : out.regulated) maxima.push_back(map_max(m));
  return verify_bound(out.params, maxima);
}

}  // namespace

BoundTrialReport run_bound_trials(std::size_t trials, std::uint64_t seed, double tau,
                                  double kappa_eos, AvgMode mode) {
  require(trials >= 1, "run_bound_trials: trials must be >= 1");
  std::vector<BoundCheck> checks(trials);
  const auto n = static_cast<std::int64_t>(trials);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    checks[static_cast<std::size_t>(i)] =
        one_trial(derive_seed(seed, static_cast<std::uint64_t>(i)), tau, kappa_eos, mode);
  }
  BoundTrialReport r;
  r.trials = trials;
  r.min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trials; ++i) {
    r.min_slack = std::min(r.min_slack, checks[i].slack);
    if (!checks[i].holds) {
      if (r.violations == 0) {
        r.first_violation_seed = derive_seed(seed, i);
        r.first_violation = checks[i];
      }
      ++r.violations;
    }
  }
  return r;
}

AttentionMap regulate_attention_scaling(const AttentionMap& a, std::span<const std::size_t> targets,
                                        std::size_t eos_index, std::ptrdiff_t pad_index, double tau,
                                        double kappa_eos) {
  require(targets.size() >= 2, "scaling regulator: need at least two targets");
  require(eos_index < a.tokens(), "scaling regulator: EOS index out of range");
  AttentionMap out = a;
  for (std::size_t h = 0; h < a.heads(); ++h) {
    std::vector<TokenMap2D> maps;
    for (std::size_t t : targets) maps.push_back(unravel(a, h, t));
    const TokenMap2D eos = unravel(a, h, eos_index);
    const double i_p = pad_index >= 0 ? map_max(unravel(a, h, static_cast<std::size_t>(pad_index)))
                                      : 0.0;
    const ScalingOutcome res = regulate_scaling(maps, eos, i_p, tau, kappa_eos);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      for (std::size_t i = 0; i < a.cells(); ++i) {
        out.values(h, i, targets[k]) = res.regulated[k].grid.data[i];
      }
    }
    for (std::size_t i = 0; i < a.cells(); ++i) {
      auto row = out.values.row(h, i);
      double s = 0.0;
      for (double v : row) s += v;
      for (double& v : row) v /= s;
    }
  }
  return out;
}

}  // namespace attnreg
