// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "attnreg/attention.hpp"
#include "attnreg/objective.hpp"
#include "attnreg/regulation_config.hpp"
#include "attnreg/run_record.hpp"
#include "attnreg/toy_diffusion.hpp"

namespace attnreg {

/// Gaussian logits scaled so that logits/sqrt(d) are standard normal.
LogitBlock random_logits(std::uint64_t seed, std::size_t heads, std::size_t side,
                         std::size_t tokens, int d, int layer_id = 0);

// ---- gradient check -------------------------------------------------------

struct GradcheckTrial {
  std::uint64_t seed = 0;
  bool skipped = false;  // quantile selection too close to a tie
  double rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckTrial> trials;
  int completed = 0;
  int skipped = 0;
  double max_rel_error = 0.0;
};

/// Analytic gradient vs central differences on seeded instances (M=64, N=8,
/// two targets, r=4) at a random nonzero theta. Tie-adjacent instances are
/// skipped and further seeds drawn until `trials` instances completed.
/// Relative error is ||g - g_fd|| / max(||g||, ||g_fd||), 0 when both vanish.
GradcheckReport run_gradcheck(int trials, std::uint64_t seed = 1, double h = 1e-5);

/// Relative error for one problem at the given parameters.
double gradient_rel_error(const RegulationProblem& problem, const std::vector<EditParams>& params,
                          double h);

// ---- suppressed-token instances ------------------------------------------

/// Instance where token 1 dominates and token 2's logits sit uniformly 5
/// (after the 1/sqrt(d) scale) below token 1's. Targets are {1, 2}.
struct SuppressedInstance {
  LogitBlock logits;
  RegulationConfig config;
  std::size_t dominant = 1;
  std::size_t suppressed = 2;
};

SuppressedInstance suppressed_instance(std::uint64_t seed);

// ---- dominance suite ------------------------------------------------------

struct SuitePrompt {
  std::vector<std::string> words;
  ToyModelConfig model;  // carries the dominance bias on the first word
  std::vector<int> ids;
  std::uint64_t seed = 0;
  std::vector<std::size_t> targets = {1, 2};
  std::size_t dominant = 1;
  std::size_t suppressed = 2;
};

inline constexpr double kSuiteBias = 2.0;
inline constexpr double kDemoBias = 3.0;

inline constexpr double kSuiteMinDominance = 1.2;

/// Two-word prompts with a dominance bias on the first word. Candidate pairs
/// are taken in a fixed order and kept when their unregulated run shows
/// dominance (index at the readout layer, final step, >= min_dominance).
std::vector<SuitePrompt> dominance_suite(const ToyModelConfig& base = {},
                                         const SamplerConfig& sampler = {}, int count = 10,
                                         double bias = kSuiteBias, std::uint64_t seed = 100,
                                         double min_dominance = kSuiteMinDominance);

/// The single paired demo instance ("cat and dog" style, bias +3 on word one).
SuitePrompt demo_prompt(const ToyModelConfig& base = {});

/// Layer where paired-run head maxima are read (first up-sampling layer).
int readout_layer(const ToyModel& model);
/// Layers the proxy metrics are read from (the default edit selection).
std::vector<int> evaluation_layers(const ToyModel& model);

struct PairedRun {
  RunRecord base;
  RunRecord regulated;
  double dominance_base = 0.0;
  double dominance_regulated = 0.0;
  double suppressed_base = 0.0;  // head-mean max of the suppressed token
  double suppressed_regulated = 0.0;
};

PairedRun run_pair(const SuitePrompt& prompt, const SamplerConfig& sampler,
                   RegulationConfig config);

// ---- ablation sweeps ------------------------------------------------------

enum class SweepKind { layers, steps, beta, kappa };

std::string to_string(SweepKind kind);
SweepKind sweep_from_string(const std::string& name);
std::vector<double> default_sweep_values(SweepKind kind);

struct SweepRow {
  std::string sweep;
  double value = 0.0;
  double coverage = 0.0;       // suite mean target_coverage (threshold 0.5)
  double coverage_base = 0.0;  // same, unregulated
  double dominance = 0.0;      // suite mean dominance_index
  double dominance_base = 0.0;
  double proxy = 0.0;          // suite mean min_target_quantile
  double proxy_base = 0.0;
  double overhead = 0.0;       // suite mean (t_reg - t_base) / t_base
  int diverged = 0;            // optimizer aborts summed over the suite
};

/// One row per value; runs execute in parallel and merge in value order.
/// The kappa sweep runs the scaling regulator with kappa_eos = value.
std::vector<SweepRow> run_sweep(SweepKind kind, const std::vector<double>& values,
                                const std::vector<SuitePrompt>& suite,
                                const SamplerConfig& sampler, const RegulationConfig& base);

}  // namespace attnreg
