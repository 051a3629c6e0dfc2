// Copyright (C) 2026 The attnreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnreg/toy_diffusion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "attnreg/error.hpp"
#include "attnreg/kernels.hpp"
#include "attnreg/regulators.hpp"
#include "attnreg/rng.hpp"

namespace attnreg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix gaussian(Rng& rng, std::size_t r, std::size_t c, double scale) {
  Matrix m(r, c);
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

bool is_special(int id) { return id == kBosId || id == kEosId || id == kPadId; }

}  // namespace

void SamplerConfig::validate() const {
  require(steps >= 1, "sampler: steps must be >= 1");
  require(train_steps >= steps, "sampler: train_steps must be >= steps");
  require(beta_start > 0.0 && beta_end > beta_start && beta_end < 1.0,
          "sampler: need 0 < beta_start < beta_end < 1");
  require(cfg_scale >= 0.0, "sampler: cfg_scale must be >= 0");
}

ToyModel::ToyModel(ToyModelConfig config) : config_(std::move(config)) {
  const auto& c = config_;
  require(c.latent_side >= 4 && c.channels >= 1 && c.heads >= 1 && c.head_dim >= 1,
          "toy model: invalid dimensions");
  require(c.embed_dim >= 2 && c.vocab > 3 && c.n_max >= 3, "toy model: invalid vocabulary");
  require(c.sides.size() % 2 == 1, "toy model: layout needs down, mid and up layers");
  for (int s : c.sides) {
    require(s >= 2 && c.latent_side % s == 0,
            "toy model: layer side " + std::to_string(s) + " must divide the latent side");
  }
  for (const auto& [tok, mag] : c.dominance_bias) {
    require(tok >= 0 && tok < c.vocab && std::isfinite(mag), "toy model: invalid dominance bias");
  }

  const std::size_t half = c.sides.size() / 2;
  int down = 0;
  int up = 0;
  for (std::size_t k = 0; k < c.sides.size(); ++k) {
    LayerDescriptor l;
    l.id = static_cast<int>(k);
    l.side = c.sides[k];
    if (k < half) {
      l.tag = LayerTag::down;
      l.name = "d" + std::to_string(down++);
    } else if (k == half) {
      l.tag = LayerTag::mid;
      l.name = "mid";
    } else {
      l.tag = LayerTag::up;
      l.name = "u" + std::to_string(up++);
    }
    layout_.push_back(l);
  }

  const auto C = static_cast<std::size_t>(c.channels);
  const auto De = static_cast<std::size_t>(c.embed_dim);
  const auto d = static_cast<std::size_t>(c.head_dim);
  const std::size_t content_dims = De / 2;
  Rng rng(c.seed);

  // Content tokens span every embedding dimension; BOS/EOS/PAD live only in
  // the upper half, which the colour projection ignores, so they carry no
  // colour of their own.
  embed_ = Matrix(static_cast<std::size_t>(c.vocab), De);
  for (std::size_t t = 0; t < embed_.rows; ++t) {
    double norm = 0.0;
    for (std::size_t j = 0; j < De; ++j) {
      const bool used = !is_special(static_cast<int>(t)) || j >= content_dims;
      embed_(t, j) = used ? rng.normal() : 0.0;
      norm += embed_(t, j) * embed_(t, j);
    }
    for (std::size_t j = 0; j < De; ++j) embed_(t, j) /= std::sqrt(norm);
  }
  colour_ = Matrix(De, C);
  // Scaled so a content token's colour has unit expected norm.
  const double colour_scale =
      std::sqrt(static_cast<double>(De) / static_cast<double>(C * content_dims));
  for (std::size_t j = 0; j < content_dims; ++j) {
    for (std::size_t k = 0; k < C; ++k) colour_(j, k) = colour_scale * rng.normal();
  }

  double wsum = 0.0;
  for (int s : c.sides) wsum += std::pow(s, -c.layer_weight_power);
  for (int s : c.sides) layer_weight_.push_back(std::pow(s, -c.layer_weight_power) / wsum);

  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(C));
  for (std::size_t l = 0; l < c.sides.size(); ++l) {
    std::vector<Matrix> q_heads;
    std::vector<Matrix> k_heads;
    std::vector<Matrix> v_heads;
    for (int h = 0; h < c.heads; ++h) {
      Matrix wq = gaussian(rng, C + 1, d, inv_sqrt_c);
      for (std::size_t j = 0; j < d; ++j) wq(C, j) = rng.normal() / std::sqrt(static_cast<double>(d));
      // Wk = feedback * colour * Wq_c + noise, so a cell already painted in
      // token t's colour queries t more strongly.
      Matrix wk = gaussian(rng, De, d, c.key_noise / std::sqrt(static_cast<double>(De)));
      for (std::size_t i = 0; i < De; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          double acc = 0.0;
          for (std::size_t k = 0; k < C; ++k) acc += colour_(i, k) * wq(k, j);
          wk(i, j) += c.feedback * acc;
        }
      }
      Matrix wv = gaussian(rng, De, C, c.value_noise / std::sqrt(static_cast<double>(De)));
      for (std::size_t k = 0; k < wv.data.size(); ++k) wv.data[k] += colour_.data[k];
      q_heads.push_back(std::move(wq));
      k_heads.push_back(std::move(wk));
      v_heads.push_back(std::move(wv));
    }
    wq_.push_back(std::move(q_heads));
    wk_.push_back(std::move(k_heads));
    wv_.push_back(std::move(v_heads));
  }

  decode_.resize(C);
  for (double& v : decode_) v = rng.normal() * inv_sqrt_c;
}

int ToyModel::token_id(const std::string& word) const {
  // FNV-1a
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : word) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return 3 + static_cast<int>(h % static_cast<std::uint64_t>(config_.vocab - 3));
}

std::vector<int> ToyModel::encode(std::span<const std::string> words) const {
  std::vector<int> ids{kBosId};
  for (const auto& w : words) ids.push_back(token_id(w));
  ids.push_back(kEosId);
  return pad(std::move(ids));
}

std::vector<int> ToyModel::pad(std::vector<int> ids) const {
  require(static_cast<int>(ids.size()) <= config_.n_max,
          "prompt of " + std::to_string(ids.size()) + " tokens exceeds n_max=" +
              std::to_string(config_.n_max));
  for (int id : ids) require(id >= 0 && id < config_.vocab, "prompt: token id out of vocabulary");
  ids.resize(static_cast<std::size_t>(config_.n_max), kPadId);
  return ids;
}

std::vector<int> ToyModel::unconditional() const { return pad({kBosId, kEosId}); }

Conditioning ToyModel::condition(std::span<const int> ids) const {
  const auto N = ids.size();
  const auto De = static_cast<std::size_t>(config_.embed_dim);
  const auto d = static_cast<std::size_t>(config_.head_dim);
  const auto C = static_cast<std::size_t>(config_.channels);
  Matrix e(N, De);
  for (std::size_t n = 0; n < N; ++n) {
    require(ids[n] >= 0 && ids[n] < config_.vocab, "condition: token id out of vocabulary");
    for (std::size_t j = 0; j < De; ++j) e(n, j) = embed_(static_cast<std::size_t>(ids[n]), j);
  }
  Conditioning cond;
  cond.ids.assign(ids.begin(), ids.end());
  for (std::size_t l = 0; l < layout_.size(); ++l) {
    std::vector<Matrix> kt_heads;
    std::vector<Matrix> v_heads;
    for (std::size_t h = 0; h < wq_[l].size(); ++h) {
      Matrix k(N, d);
      kernels::matmul(e.data, wk_[l][h].data, k.data, N, De, d);
      // Dominance bias: shift along the query bias direction so every cell's
      // logit for the token rises by magnitude * sqrt(d) (magnitude after scaling).
      const Matrix& wq = wq_[l][h];
      double q0_norm2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) q0_norm2 += wq(C, j) * wq(C, j);
      for (std::size_t n = 0; n < N; ++n) {
        for (const auto& [tok, mag] : config_.dominance_bias) {
          if (ids[n] != tok) continue;
          const double s = mag * std::sqrt(static_cast<double>(d)) / q0_norm2;
          for (std::size_t j = 0; j < d; ++j) k(n, j) += s * wq(C, j);
        }
      }
      Matrix kt(d, N);
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t j = 0; j < d; ++j) kt(j, n) = k(n, j);
      }
      Matrix v(N, C);
      kernels::matmul(e.data, wv_[l][h].data, v.data, N, De, C);
      kt_heads.push_back(std::move(kt));
      v_heads.push_back(std::move(v));
    }
    cond.keys_t.push_back(std::move(kt_heads));
    cond.values.push_back(std::move(v_heads));
  }
  return cond;
}

LogitBlock ToyModel::logits(std::size_t slot, std::span<const double> latent,
                            std::span<const double> prev_x0, const Conditioning& cond) const {
  const auto s0 = static_cast<std::size_t>(config_.latent_side);
  const auto C = static_cast<std::size_t>(config_.channels);
  const auto d = static_cast<std::size_t>(config_.head_dim);
  const auto s = static_cast<std::size_t>(layout_[slot].side);
  const std::size_t f = s0 / s;
  const std::size_t M = s * s;
  const std::size_t N = cond.ids.size();

  // Average-pooled features plus a constant bias input.
  const double wn = config_.noise_input;
  const double ws = config_.self_input;
  Matrix feat(M, C + 1);
  const double inv = 1.0 / static_cast<double>(f * f);
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = 0; b < s; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t i = a * f; i < (a + 1) * f; ++i) {
          for (std::size_t j = b * f; j < (b + 1) * f; ++j) {
            const std::size_t k = (c * s0 + i) * s0 + j;
            acc += wn * latent[k] + ws * prev_x0[k];
          }
        }
        feat(a * s + b, c) = acc * inv;
      }
      feat(a * s + b, C) = 1.0;
    }
  }

  const auto H = wq_[slot].size();
  Tensor3 z(H, M, N);
  Matrix q(M, d);
  for (std::size_t h = 0; h < H; ++h) {
    kernels::matmul(feat.data, wq_[slot][h].data, q.data, M, C + 1, d);
    kernels::matmul(q.data, cond.keys_t[slot][h].data,
                    std::span<double>(z.data).subspan(h * M * N, M * N), M, d, N);
  }
  LogitBlock block{std::move(z), config_.head_dim, layout_[slot].id, static_cast<int>(s)};
  return block;
}

void ToyModel::accumulate(std::size_t slot, const AttentionMap& a, const Conditioning& cond,
                          std::span<double> acc) const {
  const auto s0 = static_cast<std::size_t>(config_.latent_side);
  const auto C = static_cast<std::size_t>(config_.channels);
  const auto s = static_cast<std::size_t>(layout_[slot].side);
  const std::size_t f = s0 / s;
  const std::size_t M = s * s;
  const std::size_t N = cond.ids.size();
  const double weight = config_.out_gain * layer_weight_[slot] / static_cast<double>(a.heads());
  Matrix out(M, C);
  for (std::size_t h = 0; h < a.heads(); ++h) {
    kernels::matmul(std::span<const double>(a.values.data).subspan(h * M * N, M * N),
                    cond.values[slot][h].data, out.data, M, N, C);
    for (std::size_t i = 0; i < s0; ++i) {
      for (std::size_t j = 0; j < s0; ++j) {
        const std::size_t cell = (i / f) * s + (j / f);
        for (std::size_t c = 0; c < C; ++c) acc[(c * s0 + i) * s0 + j] += weight * out(cell, c);
      }
    }
  }
}

std::vector<double> initial_latent(const ToyModel& model, std::uint64_t seed) {
  const auto& c = model.config();
  std::vector<double> x(static_cast<std::size_t>(c.channels * c.latent_side * c.latent_side));
  Rng rng(derive_seed(seed, 0x1a7e47));
  for (double& v : x) v = rng.normal();
  return x;
}

std::map<int, AttentionMap> probe_attention(const ToyModel& model, std::span<const int> prompt_ids,
                                            std::span<const double> latent) {
  const Conditioning cond = model.condition(prompt_ids);
  std::map<int, AttentionMap> out;
  for (std::size_t slot = 0; slot < model.layer_count(); ++slot) {
    out.emplace(model.layout()[slot].id, compute_attention(model.logits(slot, latent, latent, cond)));
  }
  return out;
}

Matrix decode_latent(const ToyModel& model, std::span<const double> latent) {
  const auto s0 = static_cast<std::size_t>(model.config().latent_side);
  const auto C = static_cast<std::size_t>(model.config().channels);
  require(latent.size() == C * s0 * s0, "decode_latent: latent size mismatch");
  Matrix img(s0, s0);
  const auto w = model.decode_weights();
  for (std::size_t i = 0; i < s0 * s0; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < C; ++c) acc += w[c] * latent[c * s0 * s0 + i];
    img.data[i] = std::clamp(0.5 + 0.25 * acc, 0.0, 1.0);
  }
  return img;
}

Simulator::Simulator(const ToyModel& model, SamplerConfig sampler)
    : model_(model), sampler_(sampler) {
  sampler_.validate();
  const int T = sampler_.train_steps;
  alphas_cumprod_.resize(static_cast<std::size_t>(T));
  double prod = 1.0;
  for (int k = 0; k < T; ++k) {
    const double beta = sampler_.beta_start +
                        (sampler_.beta_end - sampler_.beta_start) * k / static_cast<double>(T - 1);
    prod *= 1.0 - beta;
    alphas_cumprod_[static_cast<std::size_t>(k)] = prod;
  }
  // "leading" spacing: (steps-1-k) * ratio, noisiest first.
  const int ratio = T / sampler_.steps;
  for (int k = 0; k < sampler_.steps; ++k) timesteps_.push_back((sampler_.steps - 1 - k) * ratio);
}

void Simulator::register_hook(int layer, AttentionHook hook) {
  bool known = false;
  for (const auto& l : model_.layout()) known = known || l.id == layer;
  require(known, "register_hook: no layer " + std::to_string(layer));
  require(!hooks_.contains(layer), "register_hook: layer " + std::to_string(layer) +
                                       " already has a hook");
  hooks_.emplace(layer, std::move(hook));
}

RunRecord Simulator::run(std::span<const int> prompt_ids, std::uint64_t seed, RunOptions options) {
  const auto t_start = Clock::now();
  hook_seconds_ = 0.0;
  const auto& mc = model_.config();
  require(static_cast<int>(prompt_ids.size()) == mc.n_max, "run: prompt must be padded to n_max");
  const std::size_t L = model_.layer_count();

  const Conditioning cond = model_.condition(prompt_ids);
  const Conditioning uncond = model_.condition(model_.unconditional());

  RunRecord rec;
  rec.steps = sampler_.steps;
  rec.heads = mc.heads;
  rec.tokens = mc.n_max;
  for (const auto& l : model_.layout()) rec.layer_ids.push_back(l.id);
  rec.prompt_ids.assign(prompt_ids.begin(), prompt_ids.end());
  rec.latent_channels = mc.channels;
  rec.latent_side = mc.latent_side;
  const std::size_t stat_count = static_cast<std::size_t>(rec.steps) * L *
                                 static_cast<std::size_t>(rec.heads * rec.tokens);
  rec.stat_max.assign(stat_count, 0.0);
  rec.stat_sum.assign(stat_count, 0.0);

  std::vector<double> x = initial_latent(model_, seed);
  std::vector<double> f_cond(x.size());
  std::vector<double> f_uncond(x.size());
  std::vector<double> self_cond(x.size(), 0.0);

  for (int step = 0; step < sampler_.steps; ++step) {
    std::fill(f_cond.begin(), f_cond.end(), 0.0);
    std::fill(f_uncond.begin(), f_uncond.end(), 0.0);
    std::map<int, AttentionMap> step_maps;

    for (std::size_t slot = 0; slot < L; ++slot) {
      const int layer = model_.layout()[slot].id;
      const LogitBlock z = model_.logits(slot, x, self_cond, cond);
      AttentionMap a;
      if (auto it = hooks_.find(layer); it != hooks_.end()) {
        const auto t0 = Clock::now();
        a = it->second(step, layer, z);
        hook_seconds_ += seconds_since(t0);
        if (!a.values.same_shape(z.logits)) {
          throw ContractViolation("hook on layer " + std::to_string(layer) + " at step " +
                                  std::to_string(step) + " returned the wrong shape");
        }
        if (!a.is_row_stochastic(1e-9)) {
          throw ContractViolation("hook on layer " + std::to_string(layer) + " at step " +
                                  std::to_string(step) + " returned a non-row-stochastic map");
        }
      } else {
        a = compute_attention(z);
      }
      model_.accumulate(slot, a, cond, f_cond);

      for (int h = 0; h < rec.heads; ++h) {
        for (int t = 0; t < rec.tokens; ++t) {
          double mx = 0.0;
          double sum = 0.0;
          for (std::size_t i = 0; i < a.cells(); ++i) {
            const double v = a.values(static_cast<std::size_t>(h), i, static_cast<std::size_t>(t));
            mx = std::max(mx, v);
            sum += v;
          }
          const std::size_t idx = rec.stat_index(step, slot, h, t);
          rec.stat_max[idx] = mx;
          rec.stat_sum[idx] = sum;
        }
      }
      if (options.keep_debug_maps) step_maps.emplace(layer, a);
      if (step == sampler_.steps - 1) rec.final_maps.emplace(layer, std::move(a));

      model_.accumulate(slot, compute_attention(model_.logits(slot, x, self_cond, uncond)), uncond, f_uncond);
    }
    if (options.keep_debug_maps) rec.debug_maps.push_back(std::move(step_maps));

    // Classifier-free guidance on the pre-activation, then x0 = tanh(.).
    const double g = sampler_.cfg_scale;
    const std::size_t ti = static_cast<std::size_t>(timesteps_[static_cast<std::size_t>(step)]);
    const double ab = alphas_cumprod_[ti];
    const int prev = timesteps_[static_cast<std::size_t>(step)] - sampler_.train_steps / sampler_.steps;
    const double ab_prev = prev >= 0 ? alphas_cumprod_[static_cast<std::size_t>(prev)] : 1.0;
    const double obs = mc.obs_gain * std::sqrt(ab) / (1.0 - ab);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double x0 = std::tanh(f_uncond[k] + g * (f_cond[k] - f_uncond[k]) + obs * x[k]);
      self_cond[k] = x0;
      const double eps = (x[k] - std::sqrt(ab) * x0) / std::sqrt(1.0 - ab);
      x[k] = std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps;
    }
    rec.latents.push_back(x);
  }

  rec.timing.total_seconds = seconds_since(t_start);
  rec.timing.regulation_seconds = hook_seconds_;
  rec.timing.denoiser_seconds = rec.timing.total_seconds - hook_seconds_;
  return rec;
}

std::vector<int> edited_layers(const ToyModel& model, const RegulationConfig& config) {
  if (!config.edit_layers.empty()) {
    for (std::size_t k = 0; k < config.edit_layers.size(); ++k) {
      const int l = config.edit_layers[k];
      bool known = false;
      for (const auto& d : model.layout()) known = known || d.id == l;
      require(known, "edit_layers: no layer " + std::to_string(l));
      for (std::size_t j = 0; j < k; ++j) {
        require(config.edit_layers[j] != l, "edit_layers: layer " + std::to_string(l) + " repeated");
      }
    }
    std::vector<int> ordered;
    for (const auto& d : model.layout()) {
      if (std::find(config.edit_layers.begin(), config.edit_layers.end(), d.id) !=
          config.edit_layers.end()) {
        ordered.push_back(d.id);
      }
    }
    return ordered;
  }
  return select_layers(model.layout(), config.layer_count);
}

RunRecord run_generation(const ToyModel& model, std::span<const int> prompt_ids,
                         const SamplerConfig& sampler,
                         const std::optional<RegulationConfig>& regulation, std::uint64_t seed,
                         RunOptions options) {
  const std::vector<int> ids = model.pad(std::vector<int>(prompt_ids.begin(), prompt_ids.end()));
  Simulator sim(model, sampler);
  ScheduleState schedule;
  std::vector<RegulationEvent> events;
  std::vector<int> layers;
  if (regulation && regulation->regulator != RegulatorKind::none) {
    regulation->validate();
    require(!regulation->targets.empty(), "run_generation: regulation needs targets");
    for (std::size_t t : regulation->targets) {
      require(t < ids.size(), "run_generation: target " + std::to_string(t) + " out of range");
      require(ids[t] != kPadId, "run_generation: target " + std::to_string(t) + " is PAD");
    }
    layers = edited_layers(model, *regulation);
    const PromptInfo info = prompt_info(ids);
    for (int layer : layers) {
      sim.register_hook(layer, make_regulator_hook(*regulation, info, schedule, events));
    }
  }
  RunRecord rec = sim.run(ids, seed, options);
  rec.edited_layers = layers;
  if (regulation) rec.targets = regulation->targets;
  rec.events = std::move(events);
  return rec;
}

}  // namespace attnreg
