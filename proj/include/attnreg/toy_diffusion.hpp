// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Desk-scale latent diffusion: an untrained seeded denoiser whose only
// conditioning path is cross-attention at seven resolutions, sampled with a
// deterministic DDIM loop. Attention can be intercepted per layer.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attnreg/attention.hpp"
#include "attnreg/regulation_config.hpp"
#include "attnreg/run_record.hpp"
#include "attnreg/schedule.hpp"
#include "attnreg/tensor.hpp"

namespace attnreg {

inline constexpr int kBosId = 0;
inline constexpr int kEosId = 1;
inline constexpr int kPadId = 2;

struct ToyModelConfig {
  std::uint64_t seed = 0;
  int latent_side = 16;
  int channels = 8;
  int heads = 2;
  int head_dim = 8;
  int embed_dim = 16;
  int vocab = 64;
  int n_max = 16;
  std::vector<int> sides = {16, 8, 4, 4, 4, 8, 16};  // d0 d1 d2 mid u0 u1 u2
  double feedback = 5.0;     // key alignment with query-projected token colours
  double key_noise = 0.5;    // random part of the key projection
  double value_noise = 0.1;  // random part of the value projection
  double out_gain = 1.0;
  double layer_weight_power = 4.5;  // layer output weight ~ side^-power
  double noise_input = 0.5;  // weight of x_t in the query features
  double self_input = 1.0;   // weight of the previous x0 prediction (self-conditioning)
  double obs_gain = 30.0;    // weight of the x_t observation in the posterior-mean x0
  std::vector<std::pair<int, double>> dominance_bias;  // (token id, logit shift after 1/sqrt(d))

  bool operator==(const ToyModelConfig&) const = default;
};

struct SamplerConfig {
  int steps = 50;
  int train_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double cfg_scale = 7.5;

  void validate() const;
  bool operator==(const SamplerConfig&) const = default;
};

/// Precomputed keys and values of one token sequence for every layer/head.
struct Conditioning {
  std::vector<int> ids;
  // [layer slot][head]: keys transposed (d x N) and values (N x C).
  std::vector<std::vector<Matrix>> keys_t;
  std::vector<std::vector<Matrix>> values;
};

class ToyModel {
 public:
  explicit ToyModel(ToyModelConfig config);

  const ToyModelConfig& config() const { return config_; }
  const std::vector<LayerDescriptor>& layout() const { return layout_; }
  std::size_t layer_count() const { return layout_.size(); }

  /// Deterministic word -> vocabulary id in [3, vocab).
  int token_id(const std::string& word) const;
  /// BOS, words..., EOS, then PAD up to n_max.
  std::vector<int> encode(std::span<const std::string> words) const;
  /// Pads an explicit id sequence (which must already hold BOS/EOS) to n_max.
  std::vector<int> pad(std::vector<int> ids) const;
  std::vector<int> unconditional() const;

  Conditioning condition(std::span<const int> ids) const;

  /// Q·K^T for layer `slot`. Queries read the current latent and the previous
  /// step's x0 prediction (both channel-major C x s0 x s0; zeros at step 0).
  LogitBlock logits(std::size_t slot, std::span<const double> latent,
                    std::span<const double> prev_x0, const Conditioning& cond) const;

  /// Adds this layer's attention output, upsampled, into `acc` (C x s0 x s0).
  void accumulate(std::size_t slot, const AttentionMap& a, const Conditioning& cond,
                  std::span<double> acc) const;

  const Matrix& embeddings() const { return embed_; }
  /// Fixed linear channel weights used to render a latent as grayscale.
  std::span<const double> decode_weights() const { return decode_; }

 private:
  ToyModelConfig config_;
  std::vector<LayerDescriptor> layout_;
  Matrix embed_;    // vocab x De, unit rows
  Matrix colour_;   // De x C
  std::vector<double> layer_weight_;
  // [slot][head]
  std::vector<std::vector<Matrix>> wq_;  // (C+1) x d, last row is the bias
  std::vector<std::vector<Matrix>> wk_;  // De x d
  std::vector<std::vector<Matrix>> wv_;  // De x C
  std::vector<double> decode_;
};

/// Receives (sampler step, layer id, conditional-branch logits) and returns the
/// attention map to use in the forward pass.
using AttentionHook = std::function<AttentionMap(int step, int layer, const LogitBlock& logits)>;

struct RunOptions {
  bool keep_debug_maps = false;
};

/// DDIM loop with per-layer hooks on the conditional branch.
class Simulator {
 public:
  Simulator(const ToyModel& model, SamplerConfig sampler);

  /// At most one hook per layer; must be called before run().
  void register_hook(int layer, AttentionHook hook);

  RunRecord run(std::span<const int> prompt_ids, std::uint64_t seed, RunOptions options = {});

  /// Extra seconds spent inside hooks during the last run.
  double hook_seconds() const { return hook_seconds_; }

  const std::vector<double>& alphas_cumprod() const { return alphas_cumprod_; }
  const std::vector<int>& timesteps() const { return timesteps_; }

 private:
  const ToyModel& model_;
  SamplerConfig sampler_;
  std::map<int, AttentionHook> hooks_;
  std::vector<double> alphas_cumprod_;
  std::vector<int> timesteps_;
  double hook_seconds_ = 0.0;
};

/// One full generation. With a regulation config (regulator != none) the
/// selected layers are intercepted and regulated; the record lists them.
RunRecord run_generation(const ToyModel& model, std::span<const int> prompt_ids,
                         const SamplerConfig& sampler,
                         const std::optional<RegulationConfig>& regulation, std::uint64_t seed,
                         RunOptions options = {});

/// Layers regulated under `config` for this model's layout.
std::vector<int> edited_layers(const ToyModel& model, const RegulationConfig& config);

/// Initial latent for a run seed (C x s0 x s0 standard normal).
std::vector<double> initial_latent(const ToyModel& model, std::uint64_t seed);

/// Unedited conditional attention of every layer read back from a finished
/// latent (used as both the noisy input and the self-conditioning input).
std::map<int, AttentionMap> probe_attention(const ToyModel& model, std::span<const int> prompt_ids,
                                            std::span<const double> latent);

/// Grayscale rendering of a latent in [0,1], s0 x s0.
Matrix decode_latent(const ToyModel& model, std::span<const double> latent);

}  // namespace attnreg
