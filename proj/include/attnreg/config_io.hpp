// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "attnreg/regulation_config.hpp"
#include "attnreg/toy_diffusion.hpp"

namespace attnreg {

/// Everything one CLI invocation needs. Serialized as JSON with the
/// sections "regulation", "sampler", "model" plus run-level keys.
struct CliConfig {
  RegulationConfig regulation;
  SamplerConfig sampler;
  ToyModelConfig model;
  std::uint64_t seed = 42;
  std::vector<std::string> prompt = {"cat", "dog"};
  // (word, logit shift) pairs turned into the model's dominance bias.
  std::vector<std::pair<std::string, double>> dominance = {{"cat", 3.0}};
  std::string output_dir = "out";

  bool operator==(const CliConfig&) const = default;
};

/// Parses a JSON document. Missing keys keep their defaults; unknown keys,
/// wrong types and out-of-range values throw std::invalid_argument with the
/// dotted field path in the message.
CliConfig parse_config(const std::string& json_text);
CliConfig load_config(const std::string& path);

/// Full JSON echo of every field (parse_config(config_to_json(c)) == c).
std::string config_to_json(const CliConfig& config, int indent = 2);

/// ATTNREG_SEED, when set, replaces the run seed.
void apply_env_overrides(CliConfig& config);

/// Model config with the dominance pairs resolved to token ids.
ToyModelConfig resolved_model(const CliConfig& config);

/// Padded prompt ids and, when the config lists none, targets covering every word.
std::vector<int> prompt_ids(const CliConfig& config);
RegulationConfig resolved_regulation(const CliConfig& config);

}  // namespace attnreg
